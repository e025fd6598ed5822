# Empty init for optimizers package
