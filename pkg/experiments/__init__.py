"""Experiments: scheme dispatch, figure tables and result writers used by the CLI."""

from .schemes import run_scheme
from .figures import FIGURES, reproduce_fig1, reproduce_fig2, reproduce_fig3
from .output import dumps_json, write_json, write_table, write_figure, metadata

__all__ = [
    'run_scheme', 'FIGURES', 'reproduce_fig1', 'reproduce_fig2', 'reproduce_fig3',
    'dumps_json', 'write_json', 'write_table', 'write_figure', 'metadata',
]
