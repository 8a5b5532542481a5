# Utilities: autodiff, optimizer, gradient checking, helpers
