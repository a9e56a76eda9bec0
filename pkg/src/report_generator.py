"""
Markdown run report generator
"""

import logging
from typing import Any, Dict, List, Optional

import pandas as pd
from jinja2 import Template

from src.models import ExperimentConfig

logger = logging.getLogger(__name__)

# Tables longer than this are cut in the report; the CSV keeps everything
PREVIEW_ROWS = 20


class ReportGenerator:
    """Renders report.md for one scenario run"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize report generator

        Args:
            config: Report options (currently only preview_rows)
        """
        self.config = config or {}
        self.preview_rows = int(self.config.get("preview_rows", PREVIEW_ROWS))

    def render(self, experiment: ExperimentConfig, summary: Dict[str, Any],
               tables: Optional[Dict[str, pd.DataFrame]] = None) -> str:
        """
        Render the Markdown report

        Args:
            experiment: Validated experiment configuration
            summary: Scalar findings of the scenario (nested dicts are flattened)
            tables: Artifact name -> table, previewed in the report

        Returns:
            Markdown text; contains no timestamps so reruns are byte-identical
        """
        template_data = {
            "scenario": experiment.scenario.value,
            "equation": experiment.params.to_dict(),
            "seed": experiment.seed,
            "grid": experiment.grid,
            "norms": experiment.norms,
            "sweep": experiment.sweep,
            "findings": self._flatten(summary),
            "tables": [self._preview(name, table) for name, table in sorted((tables or {}).items())],
        }
        text = Template(REPORT_TEMPLATE, trim_blocks=True, lstrip_blocks=True).render(**template_data)
        logger.debug(f"Rendered report for {experiment.scenario.value}: {len(text)} characters")
        return text

    def _flatten(self, summary: Dict[str, Any], prefix: str = "") -> List[Dict[str, str]]:
        rows = []
        for key in sorted(summary):
            value = summary[key]
            name = f"{prefix}{key}"
            if isinstance(value, dict):
                rows.extend(self._flatten(value, f"{name}."))
            else:
                rows.append({"name": name, "value": _format(value)})
        return rows

    def _preview(self, name: str, table: pd.DataFrame) -> Dict[str, Any]:
        head = table.head(self.preview_rows)
        return {
            "name": name,
            "columns": list(head.columns),
            "rows": [[_format(v) for v in row] for row in head.itertuples(index=False)],
            "total": len(table),
        }


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    if hasattr(value, "item"):
        return _format(value.item())
    return str(value)


REPORT_TEMPLATE = """# Run report: {{ scenario }}

| setting | value |
|---|---|
| equation | {{ equation.kind }} (alpha={{ equation.alpha }}, beta={{ equation.beta }}) |
| seed | {{ seed }} |
| grid | n={{ grid.n }}, L={{ '%.6g'|format(grid.box_length) }} |
| norms | {% for n in norms %}(s={{ n.s }}, b={{ n.b }}){% if not loop.last %}, {% endif %}{% endfor %} |
{% for key, values in sweep|dictsort %}
| sweep.{{ key }} | {{ values|join(', ') }} |
{% endfor %}

## Findings

{% if findings %}
| quantity | value |
|---|---|
{% for row in findings %}
| {{ row.name }} | {{ row.value }} |
{% endfor %}
{% else %}
No scalar findings.
{% endif %}
{% for table in tables %}

## {{ table.name }}

| {{ table.columns|join(' | ') }} |
|{% for c in table.columns %}---|{% endfor %}

{% for row in table.rows %}
| {{ row|join(' | ') }} |
{% endfor %}
{% if table.total > table.rows|length %}

_{{ table.rows|length }} of {{ table.total }} rows shown._
{% endif %}
{% endfor %}
"""
