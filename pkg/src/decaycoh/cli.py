"""Command-line interface: ``model``, ``simulate``, ``estimate`` and ``compare``.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure, 4 file I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment
from .errors import NumericalError, ValidationError
from .estimator import estimate_all
from .wavio import read_rir_wav, write_csv, write_estimates_csv, write_rir_wav

log = logging.getLogger("decaycoh")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

MODEL_COLUMNS = ("interval_index", "t_s", "frequency_hz", "model_real", "model_imag",
                 "sinc", "j0")
COMPARE_COLUMNS = ("interval_index", "t_start_s", "t_end_s", "t_model_s", "frequency_hz",
                   "estimate_real", "estimate_imag", "estimate_abs", "model", "sinc",
                   "j0", "in_band")

GNUPLOT_TEMPLATE = """\
set datafile separator ','
set key autotitle columnhead
set xlabel 'frequency (Hz)'
set ylabel 'Re coherence'
set yrange [-0.6:1.05]
do for [i=0:{last}] {{
  set title sprintf('interval %d', i)
  plot '{csv}' using (($1==i && $12==1) ? $5 : 1/0):6 with lines title 'estimate', \\
       '' using (($1==i && $12==1) ? $5 : 1/0):9 with lines title 'model', \\
       '' using (($1==i && $12==1) ? $5 : 1/0):10 with lines title 'sinc', \\
       '' using (($1==i && $12==1) ? $5 : 1/0):11 with lines title 'J0'
  pause -1
}}
"""


def _load_config(args) -> experiment.ExperimentConfig:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output_dir={json.dumps(str(args.out))}")
    return experiment.ExperimentConfig.load(args.config, overrides)


def cmd_model(cfg: experiment.ExperimentConfig) -> Path:
    curves = experiment.model_curves(cfg)
    columns = list(MODEL_COLUMNS)
    if cfg.mc_samples:
        columns += ["mc_real", "mc_imag", "mc_stderr"]

    def rows():
        for cur in curves:
            for j, f in enumerate(cur.frequencies):
                row = [cur.index, cur.t, f, cur.model[j].real, cur.model[j].imag,
                       cur.sinc[j], cur.j0[j]]
                if cur.mc is not None:
                    row += [cur.mc[j].real, cur.mc[j].imag, cur.mc_stderr[j]]
                yield row

    return write_csv(cfg.output_dir / "model.csv", columns, rows())


def cmd_simulate(cfg: experiment.ExperimentConfig) -> Path:
    ir = experiment.simulate(cfg)
    return write_rir_wav(cfg.output_dir / "rir.wav", ir)


def cmd_estimate(wav_path, cfg: experiment.ExperimentConfig) -> Path:
    ir = read_rir_wav(wav_path)
    results = estimate_all(ir, cfg.estimation)
    return write_estimates_csv(cfg.output_dir / "estimate.csv", results)


def cmd_compare(cfg: experiment.ExperimentConfig, gnuplot: bool = False) -> Path:
    comparisons = experiment.compare(cfg)

    def rows():
        for cmp in comparisons:
            est, cur = cmp.estimate, cmp.curves
            for j, f in enumerate(est.frequencies):
                g = est.coherence[j]
                yield (est.index, est.t_start, est.t_end, cur.t, f, g.real, g.imag,
                       abs(g), cur.model[j].real, cur.sinc[j], cur.j0[j],
                       int(cmp.in_band[j]))

    out = cfg.output_dir
    csv_path = write_csv(out / "compare.csv", COMPARE_COLUMNS, rows())
    summary = {
        "band_hz": list(cfg.band),
        "intervals": [cmp.summary() for cmp in comparisons],
        "config": cfg.raw,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str))
    if gnuplot:
        (out / "compare.gp").write_text(
            GNUPLOT_TEMPLATE.format(last=len(comparisons) - 1, csv=csv_path.name))
    for cmp in comparisons:
        log.info("interval %d: rmse model %.4f, rmse sinc %.4f",
                 cmp.estimate.index, cmp.rmse_model, cmp.rmse_sinc)
    return csv_path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="seed for Monte-Carlo checks")
    common.add_argument("--set", action="append", metavar="PATH=VALUE",
                        help="override a config entry, e.g. room.rx=0.7 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="decaycoh",
        description="Spatial coherence of decaying reverberant fields in shoebox rooms.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("model", parents=[common], help="write model and reference curves")
    sub.add_parser("simulate", parents=[common], help="write image-source RIRs as WAV")
    est = sub.add_parser("estimate", parents=[common], help="estimate coherence from a WAV")
    est.add_argument("wav", type=Path)
    cmp = sub.add_parser("compare", parents=[common],
                         help="simulate, estimate and score against the model")
    cmp.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args)
        if args.command == "model":
            path = cmd_model(cfg)
        elif args.command == "simulate":
            path = cmd_simulate(cfg)
        elif args.command == "estimate":
            path = cmd_estimate(args.wav, cfg)
        else:
            path = cmd_compare(cfg, gnuplot=args.gnuplot)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
