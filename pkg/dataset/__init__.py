# Ice-layer records, climate samples and synthetic data
