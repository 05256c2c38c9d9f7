# Optimization and the trial protocol
