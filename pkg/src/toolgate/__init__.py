"""toolgate: an MCP aggregation gateway with semantic tool routing,
a ReACT agent driver over it, and trajectory grading + metrics.
"""

__version__ = "0.1.0"
