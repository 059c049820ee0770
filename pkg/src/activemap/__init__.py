"""Active robotic mapping with occupancy grids and learned exploration."""
