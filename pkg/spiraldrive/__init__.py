"""Strong tilted-drive pulse toolkit: spin propagation, offset-sine and OCT pulses, spiral antenna fields, NV data analysis."""

__version__ = "0.1.0"
