# Empty init for writers package