"""Dataset loading, experiment grids, report rendering and the CLI."""
