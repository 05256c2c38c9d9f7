# Numeric core for the graph network
