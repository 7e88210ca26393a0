"""Hyperbolic graphs, their boundary cells and ray-faithful spanning trees."""
