"""Total viewshed computation on raster DEMs by per-sector grid shearing."""
