# Empty init for simulation package
