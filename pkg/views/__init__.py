# Command-line views
