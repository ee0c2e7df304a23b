from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-wide settings, read from WMD_* environment variables or .env."""

    log_level: str = "INFO"
    default_salt: int = 0x5EED  # used when --salt is not given
    workers: int = 1  # joblib workers for Monte Carlo chunks
    chunk_size: int = 250  # reps per Monte Carlo work unit
    output_dir: str = "results"

    model_config = {"env_file": ".env", "env_file_encoding": "utf-8", "env_prefix": "WMD_"}


settings = Settings()
