from foresight.forecast.generator import (
    ForecastFields,
    ForecastGenerator,
    parse_generation,
    render_generation,
)

__all__ = [
    "ForecastFields",
    "ForecastGenerator",
    "parse_generation",
    "render_generation",
]
