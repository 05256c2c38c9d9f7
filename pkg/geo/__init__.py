# Geospatial graph construction
