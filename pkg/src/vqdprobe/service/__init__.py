"""HTTP service wrapping the probe toolkit: pydantic schemas, handler
functions shared with the CLI, and the FastAPI app."""
