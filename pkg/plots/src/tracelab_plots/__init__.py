from tracelab_plots.figure import SchemaError, SweepTable, build_panels, render

__version__ = "0.1.0"
