"""Reference PyTorch trainer for the capax study harness."""

__version__ = "0.1.0"
