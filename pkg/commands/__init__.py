"""Click subcommands, registered by app.create_cli."""
