"""Command-line surface: config files, model containers, reports, commands."""
