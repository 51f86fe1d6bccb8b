"""Home energy scheduling optimizer."""
