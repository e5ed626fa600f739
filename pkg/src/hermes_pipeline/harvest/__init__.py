"""Built-in harvest plugins."""
