"""CLI entry points, run manifests, and the websocket teleop/spectate host."""
