"""Command line: `puzzlelab <kind> [options]`.

Exit codes: 0 on full success, 2 when some items failed, 1 on a bad spec.
"""
from __future__ import annotations

import sys

import click

from .experiments import KINDS, ExperimentSpec, parse_c, run


def _parse_range(text: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise click.BadParameter(f"expected A:B, got {text!r}")
    return a, b


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("kind", type=click.Choice(KINDS))
@click.option("--c", "cs", multiple=True,
              help="Parameter as RE or RE,IM, or a name (basilica, airplane, rabbit, "
                   "fibonacci, feigenbaum). Repeatable.")
@click.option("--c-range", help="Real parameter range A:B (scans).")
@click.option("--samples", type=int, default=200, show_default=True)
@click.option("--levels", type=int, default=8, show_default=True)
@click.option("--orbit-budget", type=int, default=200, show_default=True)
@click.option("--grid", type=int, default=512, show_default=True)
@click.option("--mu-bar", type=float, default=0.05, show_default=True)
@click.option("--ratio-cap", type=float, default=100.0, show_default=True)
@click.option("--eps", "epsilons", type=float, multiple=True,
              help="Saddle-node offsets for cascade-scaling. Repeatable.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", default="out", show_default=True, type=click.Path(file_okay=False))
@click.option("--svg", is_flag=True, help="Also write SVG plots.")
def command(kind, cs, c_range, samples, levels, orbit_budget, grid, mu_bar, ratio_cap,
            epsilons, seed, workers, out, svg):
    """Run one experiment KIND and write report.json, CSV and SVG under --out."""
    try:
        params = tuple(parse_c(t) for t in cs)
        if not params and c_range is None and kind == "theorem-1-growth":
            params = (parse_c("fibonacci"),)
        spec = ExperimentSpec(kind, params, _parse_range(c_range) if c_range else None,
                              samples, levels, orbit_budget, grid, mu_bar, ratio_cap,
                              tuple(epsilons) or (1e-2, 1e-3, 1e-4), seed, workers)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    report = run(spec, out, svg)
    click.echo(f"{kind}: {len(report.items)} items, {report.failures} failed -> {out}")
    for name in report.files:
        click.echo(f"  {name}")
    return 2 if report.failures else 0


def main(argv=None) -> int:
    try:
        code = command.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        code = 1
    except click.ClickException as exc:
        exc.show()
        code = 1
    code = code if isinstance(code, int) else 0
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
