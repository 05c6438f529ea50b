"""Cooperative kitchen gridworld with a biased-partner training pipeline.

Subpackages are imported lazily where heavyweight (torch); the engine and the
lightweight analysis helpers are importable directly from the package root.
"""

from coopchef.engine import (
    GameState,
    Layout,
    LayoutError,
    Recipe,
    StepOutcome,
    list_layouts,
    load_layout,
    observe,
    parse_layout,
    render_text,
    reset,
    run_episode,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "GameState",
    "Layout",
    "LayoutError",
    "Recipe",
    "StepOutcome",
    "list_layouts",
    "load_layout",
    "observe",
    "parse_layout",
    "render_text",
    "reset",
    "run_episode",
    "step",
    "__version__",
]
