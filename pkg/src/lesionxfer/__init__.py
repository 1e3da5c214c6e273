"""Two-task skin-lesion classification with transfer learning at desk scale."""

__version__ = "0.1.0"
