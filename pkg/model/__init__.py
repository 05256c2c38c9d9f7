# Network assembly and checkpoints
