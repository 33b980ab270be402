"""Configuration, pipeline orchestration, exports, rendering and the command line."""
