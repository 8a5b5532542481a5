# Services module for training, evaluation and data handling
