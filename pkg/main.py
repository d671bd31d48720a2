#!/usr/bin/env python3
"""
Command-line entry point for the SBP engine.
Generates graphs, runs serial / DC-SBP / EDiSt inference and sweeps benchmarks to CSV.

Usage:
    python3 main.py generate --preset tiny-TTT33 --out graphs/tiny-TTT33 --seed 1
    python3 main.py run --graph graphs/tiny-TTT33/edges.tsv --truth graphs/tiny-TTT33/truth.tsv \\
        --algo edist --ranks 4 --seed 1 --out partition.tsv
    python3 main.py bench --preset-list tiny-TTT150,tiny-FFF150 --algos serial,dcsbp \\
        --ranks-list 1,2,4 --seeds 3 --csv bench.csv
    python3 main.py presets
"""

import argparse
import logging
import sys
from typing import List, Optional

from src.analysis.benchmark import island_correlation, parse_list, run_bench, seed_list, summarize
from src.analysis.metrics import nmi, normalized_dl
from src.data.config import BENCH_COLUMNS, TRACE_COLUMNS, configure_logging, get_default_seed, load_environment
from src.data.data_loader import load_graph, load_truth, write_partition
from src.data.graph_generator import (generate, list_presets, load_params, preset, preset_table,
                                      write_generated)
from src.data.sbp_config import SbpConfig, get_profile_description, list_available_profiles
from src.distributed.launcher import ALGORITHMS, BACKENDS, run_algorithm, validate_run
from src.errors import InvalidOperationError, ReplicaDivergenceError
from src.presentation.formatters import (format_duration, format_preset_table, format_summary_line,
                                         write_bench_csv, write_trace_csv)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INVARIANT = 3


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems with exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else get_default_seed()
    if args.preset is None and args.params is None:
        raise ValueError("generate needs --preset or --params")

    base = preset(args.preset, seed=seed) if args.preset else None
    params = load_params(args.params, base=base) if args.params else base
    if args.seed is not None or args.params is None:
        params = params.with_overrides(seed=seed)

    print(f"🔄 Generating {params.name}: V={params.num_vertices} C={params.num_communities} "
          f"seed={params.seed}")
    g, truth = generate(params)
    paths = write_generated(args.out, params, g, truth)
    print(f"✅ {g.num_vertices} vertices, {g.num_edges} edges")
    for role, path in paths.items():
        print(f"   {role}: {path}")
    return EXIT_OK


def cmd_run(args, argv: List[str]) -> int:
    seed = args.seed if args.seed is not None else get_default_seed()
    cfg = SbpConfig.from_profile(args.profile, seed=seed, workers=args.workers)

    truth = load_truth(args.truth, base_index=args.base_index) if args.truth else None
    g = load_graph(args.graph, base_index=args.base_index,
                   num_vertices=len(truth) if truth is not None else None)
    validate_run(args.algo, args.ranks, args.backend, g.num_vertices)
    print(f"📊 Loaded {args.graph}: V={g.num_vertices} E={g.num_edges}")

    result = run_algorithm(g, cfg, algo=args.algo, ranks=args.ranks, backend=args.backend)
    write_partition(args.out, result.assignment, base_index=args.base_index)
    if args.trace:
        write_trace_csv(args.trace, result.trace)
        print(f"✅ Trace written: {args.trace}")

    dl_norm = (normalized_dl(result.description_length, g.num_vertices, g.num_edges)
               if g.num_edges else None)
    score = nmi(truth, result.assignment) if truth is not None else None
    print(f"✅ Partition written: {args.out} "
          f"({format_duration(result.timings['wall_seconds'])})")
    print(format_summary_line(args.algo, args.ranks, result, dl_norm, score, seed, argv))
    return EXIT_OK


def cmd_bench(args) -> int:
    base_seed = args.seed if args.seed is not None else get_default_seed()
    cfg = SbpConfig.from_profile(args.profile, seed=base_seed, workers=args.workers)
    presets = parse_list(args.preset_list)
    algos = parse_list(args.algos)
    ranks_list = parse_list(args.ranks_list, int)
    for algo in algos:
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    for name in presets:
        preset(name)

    def report(row):
        if row['status'] == 'ok':
            print(f"   ✅ {row['preset']} {row['algo']} N={row['ranks']} seed={row['seed']}: "
                  f"NMI={row['nmi']:.3f} DL_norm={row['dl_norm']:.4f} C={row['final_C']}")
        else:
            print(f"   ❌ {row['preset']} {row['algo']} N={row['ranks']} seed={row['seed']}: "
                  f"{row['status']}")

    print(f"🚀 Benchmark: {len(presets)} presets x {len(algos)} algorithms x "
          f"{len(ranks_list)} rank counts x {args.seeds} seeds")
    frame = run_bench(presets, algos, ranks_list, seed_list(args.seeds, base_seed), cfg,
                      backend=args.backend, progress=report)
    write_bench_csv(args.csv, frame)
    print(f"✅ CSV written: {args.csv} ({len(frame)} rows)")
    print(format_preset_table(summarize(frame)))
    if 'dcsbp' in algos:
        print(f"📊 dcsbp spearman(island_fraction, nmi) = {island_correlation(frame):.4f}")
    return EXIT_OK


def cmd_presets(args) -> int:
    print(format_preset_table(preset_table()))
    print("")
    print("Desk-scale variants: " + ', '.join(n for n in list_presets() if n.startswith('tiny-')))
    print("Profiles:")
    for profile in list_available_profiles():
        print(f"  {profile}: {get_profile_description(profile)}")
    return EXIT_OK


def build_parser() -> CliParser:
    parser = CliParser(prog='main.py', description='Stochastic block partitioning engine')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING (default: SBP_LOG_LEVEL)')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    gen = sub.add_parser('generate', help='Generate a DCSBM graph with planted communities')
    gen.add_argument('--preset', help='Preset name (see the presets command)')
    gen.add_argument('--params', help='key=value parameter file (overrides the preset)')
    gen.add_argument('--out', required=True, help='Output directory')
    gen.add_argument('--seed', type=int, default=None, help='Seed (default: SBP_SEED or 42)')

    run = sub.add_parser('run', help='Partition a graph',
                         epilog=f"Trace CSV columns: {','.join(TRACE_COLUMNS)}")
    run.add_argument('--graph', required=True, help='Edge list (.tsv) or Matrix Market (.mtx)')
    run.add_argument('--truth', help='Ground-truth partition for NMI')
    run.add_argument('--algo', choices=ALGORITHMS, default='serial')
    run.add_argument('--ranks', type=int, default=1)
    run.add_argument('--backend', choices=BACKENDS, default='inprocess')
    run.add_argument('--workers', type=int, default=None, help='Hybrid sweep worker count')
    run.add_argument('--seed', type=int, default=None)
    run.add_argument('--out', required=True, help='Partition output file')
    run.add_argument('--trace', help='Write the per-phase trace CSV here')
    run.add_argument('--profile', choices=list_available_profiles(), default='default')
    run.add_argument('--base-index', type=int, default=0, help='Id of the first vertex in files')

    bench = sub.add_parser('bench', help='Benchmark sweep to CSV',
                           epilog=f"CSV columns: {','.join(BENCH_COLUMNS)}; failed cells carry "
                                  f"status=error:<ExceptionType>")
    bench.add_argument('--preset-list', required=True, help='Comma separated preset names')
    bench.add_argument('--algos', required=True, help='Comma separated algorithms')
    bench.add_argument('--ranks-list', default='1', help='Comma separated rank counts')
    bench.add_argument('--seeds', type=int, default=1, help='Number of seeds per cell')
    bench.add_argument('--seed', type=int, default=None, help='First seed')
    bench.add_argument('--csv', required=True, help='Output CSV')
    bench.add_argument('--backend', choices=BACKENDS, default='inprocess')
    bench.add_argument('--workers', type=int, default=None)
    bench.add_argument('--profile', choices=list_available_profiles(), default='default')

    sub.add_parser('presets', help='List generator presets and inference profiles')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    load_environment()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        if args.command == 'generate':
            return cmd_generate(args)
        if args.command == 'run':
            return cmd_run(args, argv)
        if args.command == 'bench':
            return cmd_bench(args)
        return cmd_presets(args)
    except ReplicaDivergenceError as e:
        print(f"❌ Replica divergence: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except InvalidOperationError as e:
        logger.exception("Invalid blockmodel operation")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, FileNotFoundError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.exception("Run failed")
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
