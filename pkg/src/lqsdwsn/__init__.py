"""Link-quality-gated SDWSN simulator."""

__version__ = "0.1.0"
