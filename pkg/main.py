#!/usr/bin/env python3
"""
Pseudogroup Fixed-Point Toolkit - Main Entry Point
Command-line front end over the word, fixed-point, perturbation and orbit engines

Usage:
    python main.py word "a^-1 b a^2"
    python main.py fixed-points "b a"
    python main.py split "b a" "a b" --q 0.3 0
    python main.py hyperbolic
    python main.py metric --conjugators
    python main.py domain-map "b a" --html
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

import yaml

from modules.config import DEFAULT_CONFIG_PATH, RunConfig, load_run_config, write_run_config
from modules.errors import (
    BudgetExhausted,
    CommensurableWords,
    ConfigError,
    ContourOutOfDomain,
    NonConvergence,
    PreconditionError,
    SeparationFailure,
    WordParseError,
)
from modules.fixed_point_engine import isolate_fixed_points
from modules.germ_core import DiskDomain, analytic_distance, identity
from modules.orbit_explorer import certificate_rows, disjoint_hyperbolic_orbits
from modules.pseudogroup_engine import (
    CLOSED,
    OPEN,
    GeneratorPair,
    domain_grid,
    pair_from_config,
    pair_to_specs,
    validate_run_config,
)
from modules.perturbation_engine import eliminate_all_common_fixed_points, split_common_fixed_point
from modules.results_writer import ResultsWriter, dumps
from modules.word_algebra import (
    FREE,
    Orders,
    format_word,
    letters,
    minimal_conjugate,
    parse_word,
    primitive_root,
    type1_decomposition,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SEPARATION = 2
EXIT_COMMENSURABLE = 3
EXIT_BUDGET = 4

LOG_FILE = "logs/pseudogroup.log"


# ===========================================
# SETUP
# ===========================================
def setup_logging(level: str = "INFO", file_enabled: bool = True, console_enabled: bool = True):
    """File handler under logs/ plus stderr; stdout stays reserved for results"""
    handlers: List[logging.Handler] = []
    if file_enabled:
        os.makedirs('logs', exist_ok=True)
        handlers.append(logging.FileHandler(LOG_FILE))
    if console_enabled:
        handlers.append(logging.StreamHandler(sys.stderr))
    if not handlers:
        handlers.append(logging.NullHandler())
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def load_config(args: argparse.Namespace, required: bool = True) -> Optional[RunConfig]:
    """Load, override from flags, validate. Raises ConfigError."""
    path = args.config or (str(DEFAULT_CONFIG_PATH) if required or DEFAULT_CONFIG_PATH.exists() else None)
    if path is None:
        return None
    try:
        cfg = load_run_config(path)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}", [str(e)]) from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file is not valid YAML: {path}", [str(e)]) from e
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"malformed config document: {path}", [f"{type(e).__name__}: {e}"]) from e

    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.output_dir = args.out
    if args.tol is not None:
        cfg.fixed_points = replace(cfg.fixed_points, tol=args.tol)

    setup_logging(cfg.log_level, cfg.log_file_enabled, cfg.log_console_enabled)
    validation = validate_run_config(cfg)
    if not validation.is_valid:
        raise ConfigError(validation.message, validation.failed_checks)
    logger.info(f"✅ {validation.message} ({path})")
    return cfg


def emit(obj: Any, lines: bool = False):
    """Machine-readable results go to stdout"""
    if lines:
        for item in obj:
            sys.stdout.write(dumps(item, indent=None) + "\n")
    else:
        sys.stdout.write(dumps(obj) + "\n")
    sys.stdout.flush()


def _region(cfg: RunConfig) -> DiskDomain:
    settings = cfg.fixed_points
    center = complex(*settings.region_center)
    return DiskDomain(center, settings.region_radius or cfg.disc_radius, True)


# ===========================================
# COMMANDS
# ===========================================
def cmd_word(args: argparse.Namespace) -> int:
    """Reduced form, root, minimal conjugate and letter split of one word"""
    cfg = load_config(args, required=bool(args.config))
    orders = Orders(*cfg.orders) if cfg else FREE
    word = parse_word(args.word, orders)

    report: Dict[str, Any] = {
        "input": args.word,
        "reduced": format_word(word),
        "syllables": [list(s) for s in word.syllables],
        "syllable_length": word.length,
        "letter_length": word.letter_length,
        "identity": word.is_identity,
        "letters": [list(s) for s in letters(word)],
    }
    if not word.is_identity:
        root, exponent = primitive_root(word)
        w1, w2 = type1_decomposition(word)
        w3, w4, simplified = minimal_conjugate(word)
        report["primitive_root"] = {"root": format_word(root), "exponent": exponent}
        report["type1"] = {"conjugator": format_word(w1), "core": format_word(w2)}
        report["minimal_conjugate"] = {"conjugator": format_word(w3), "core": format_word(w4),
                                       "simplified": simplified}

    if cfg is not None:
        pair = pair_from_config(cfg)
        x, y, mask = domain_grid(pair.element(word), cfg.domain_map.resolution, cfg.threads)
        inside = int(mask.sum())
        report["domain_sample"] = {"resolution": cfg.domain_map.resolution, "grid_points": int(mask.size),
                                   "in_domain": inside, "fraction": inside / mask.size}

    emit(report)
    writer = ResultsWriter(args.out or (cfg.output_dir if cfg else "results"))
    writer.write_json("word.json", report)
    return EXIT_OK


def cmd_fixed_points(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    pair = pair_from_config(cfg)
    word = parse_word(args.word, pair.orders)
    region = _region(cfg)
    logger.info(f"🎯 fixed points of {format_word(word)} in |z - {region.center:.3g}| <= {region.radius:g}")

    records = isolate_fixed_points(pair.element(word), region, cfg.fixed_points.tol,
                                   word=word, threads=cfg.threads)
    emit(records, lines=True)
    ResultsWriter(cfg.output_dir).write_jsonl("fixed_points.jsonl", records)
    logger.info(f"✅ {len(records)} fixed point(s)")
    return EXIT_OK


def _perturbed_config(cfg: RunConfig, pair: GeneratorPair) -> RunConfig:
    f_spec, g_spec = pair_to_specs(pair)
    return replace(cfg, f_spec=f_spec, g_spec=g_spec, source=None, unknown_keys=[])


def cmd_split(args: argparse.Namespace) -> int:
    """Split common fixed points of two words; writes the perturbed config"""
    cfg = load_config(args)
    pair = pair_from_config(cfg)
    w_i = parse_word(args.word_i, pair.orders)
    w_j = parse_word(args.word_j, pair.orders)
    writer = ResultsWriter(cfg.output_dir)
    q = args.q or cfg.split.q

    try:
        if q is not None:
            new_pair, transcript = split_common_fixed_point(w_i, w_j, pair, complex(*q), settings=cfg.split,
                                                            tol=cfg.fixed_points.tol, threads=cfg.threads)
        else:
            new_pair, transcript = eliminate_all_common_fixed_points(w_i, w_j, pair, _region(cfg), cfg.split,
                                                                     cfg.fixed_points.tol, cfg.threads)
    except BudgetExhausted as e:
        writer.write_json("split_transcript.json", e.transcript)
        emit(e.transcript)
        raise

    document = transcript.to_dict()
    new_cfg = _perturbed_config(cfg, new_pair)
    config_path = write_run_config(new_cfg, writer.path("split_config.yaml"))
    revalidated = validate_run_config(load_run_config(str(config_path)))
    document["config"] = {"path": config_path.name, "valid": revalidated.is_valid,
                          "failed_checks": revalidated.failed_checks}
    if not revalidated.is_valid:
        logger.warning(f"⚠️ emitted config does not re-validate: {revalidated.failed_checks}")

    writer.write_json("split_transcript.json", document)
    emit(document)
    logger.info(f"✅ split finished: {len(transcript.steps)} step(s), {len(transcript.rounds)} round(s)")
    return EXIT_OK


def cmd_hyperbolic(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    pair = pair_from_config(cfg)
    certificates = disjoint_hyperbolic_orbits(pair, settings=cfg.hyperbolic, tol=cfg.fixed_points.tol,
                                              threads=cfg.threads)
    writer = ResultsWriter(cfg.output_dir)
    writer.write_jsonl("hyperbolic_certificates.jsonl", certificates)
    writer.write_csv("hyperbolic_summary.csv", certificate_rows(certificates),
                     columns=["word", "re", "im", "multiplier_re", "multiplier_im", "cells", "depth",
                              "min_margin", "findings"])
    emit(certificates, lines=True)
    logger.info(f"✅ {len(certificates)} certificate(s)")
    return EXIT_OK


def cmd_metric(args: argparse.Namespace) -> int:
    """d_A between the two generators, or between their conjugators"""
    cfg = load_config(args)
    pair = pair_from_config(cfg)
    if args.conjugators:
        left = pair.f.conjugator or identity()
        right = pair.g.conjugator or identity()
        subject = "conjugators"
    else:
        left, right = pair.f.core, pair.g.core
        subject = "generators"
    report = {"subject": subject, "jet_order": cfg.jet_order,
              "distance": analytic_distance(left, right, cfg.jet_order)}
    emit(report)
    ResultsWriter(cfg.output_dir).write_json("metric.json", report)
    return EXIT_OK


def cmd_domain_map(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    pair = pair_from_config(cfg)
    word = parse_word(args.word, pair.orders)
    closed = args.closed or cfg.domain_map.closed
    element = pair.element(word, closed=closed)
    resolution = args.resolution or cfg.domain_map.resolution
    x, y, mask = domain_grid(element, resolution, cfg.threads, CLOSED if closed else OPEN)

    rows = [{"x": float(a), "y": float(b), "in_domain": bool(m)} for a, b, m in zip(x, y, mask)]
    writer = ResultsWriter(cfg.output_dir)
    writer.write_csv("domain_map.csv", rows, columns=["x", "y", "in_domain"])
    if args.html:
        kind = "closed" if closed else "open"
        writer.write_domain_html("domain_map.html", x, y, mask, f"{kind} domain of {format_word(word)}")
    summary = {"word": format_word(word), "closed": closed, "resolution": resolution,
               "grid_points": len(rows), "in_domain": int(mask.sum())}
    emit(summary)
    return EXIT_OK


COMMANDS = {
    "word": cmd_word,
    "fixed-points": cmd_fixed_points,
    "split": cmd_split,
    "hyperbolic": cmd_hyperbolic,
    "metric": cmd_metric,
    "domain-map": cmd_domain_map,
}


# ===========================================
# ENTRY POINT
# ===========================================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Pseudogroup Fixed-Point Toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Reduce a word and show its minimal conjugate
  python main.py word "a^-1 b a^2"

  # Fixed points of b∘a for the configured pair
  python main.py fixed-points "b a" --config config/config.yaml

  # Split the common fixed point 0.3 of two words
  python main.py split "b a" "a b" --q 0.3 0 --config config/fixtures/split_fixture.yaml

  # Hyperbolic fixed points with disjoint orbits
  python main.py hyperbolic --config config/fixtures/richer_pair.yaml --out results/richer

Exit codes: 0 ok, 1 config error, 2 separation failure, 3 commensurable words, 4 budget exhausted
        """
    )
    parser.add_argument('--config', help=f'Run document (default: {DEFAULT_CONFIG_PATH.name} under config/)')
    parser.add_argument('--out', help='Output directory (default: output.dir of the run document)')
    parser.add_argument('--seed', type=int, help='Override run.seed')
    parser.add_argument('--threads', type=int, help='Override run.threads')
    parser.add_argument('--tol', type=float, help='Subdivision floor for fixed-point isolation')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    word_parser = subparsers.add_parser('word', help='Reduce and analyse a word')
    word_parser.add_argument('word', help='Word text, e.g. "a^-1 b a^2" (rightmost letter applies first)')

    fp_parser = subparsers.add_parser('fixed-points', help='Isolate and classify fixed points of a word')
    fp_parser.add_argument('word', help='Word text')

    split_parser = subparsers.add_parser('split', help='Split common fixed points of two words')
    split_parser.add_argument('word_i', help='Word whose fixed points are kept')
    split_parser.add_argument('word_j', help='Word that is perturbed off the common point')
    split_parser.add_argument('--q', type=float, nargs=2, metavar=('RE', 'IM'),
                              help='Common fixed point to split (default: every nonzero common point)')

    subparsers.add_parser('hyperbolic', help='Certify hyperbolic fixed points with disjoint orbits')

    metric_parser = subparsers.add_parser('metric', help='Analytic distance between the generators')
    metric_parser.add_argument('--conjugators', action='store_true', help='Compare the conjugators instead')

    map_parser = subparsers.add_parser('domain-map', help='Grid of the domain of a word')
    map_parser.add_argument('word', help='Word text')
    map_parser.add_argument('--closed', action='store_true', help='Closed (9/10) domain instead of open')
    map_parser.add_argument('--resolution', type=int, help='Grid points per side')
    map_parser.add_argument('--html', action='store_true', help='Also write a plotly HTML figure')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    setup_logging(os.getenv("PSEUDOGROUP_LOG_LEVEL", "INFO"))
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        for check in e.failed_checks:
            logger.error(f"   - {check}")
        return EXIT_CONFIG
    except WordParseError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG
    except CommensurableWords as e:
        logger.error(f"❌ {e}")
        return EXIT_COMMENSURABLE
    except (SeparationFailure, ContourOutOfDomain, NonConvergence) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_SEPARATION
    except BudgetExhausted as e:
        logger.error(f"❌ budget exhausted: {e}")
        return EXIT_BUDGET
    except PreconditionError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
