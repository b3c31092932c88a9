import json

from django.core.management.base import CommandError

from clonedex.bench import load_seed_methods, run_oracle_suite, run_recall, run_throughput
from clonedex.config import config

from ._options import CloneCommand, add_detection_arguments, translate_errors

EXIT_BENCH_FAILED = 1


class Command(CloneCommand):
    help = 'Measure recall on planted Type-1/2/3 clones; optionally run the oracle suite and a throughput test'
    subcommand = 'bench'

    def add_arguments(self, parser):
        add_detection_arguments(parser)
        parser.add_argument(
            '--seeds', default=config.SEEDS_PATH,
            help='Directory of seed sources whose methods get mutated'
        )
        parser.add_argument(
            '--per-type', type=int, default=config.BENCH_PER_TYPE,
            help='Seed methods mutated per clone type'
        )
        parser.add_argument(
            '--edit-fraction', type=float, default=config.BENCH_EDIT_FRACTION,
            help='Share of statements edited for Type-3 mutants, at most 0.3'
        )
        parser.add_argument(
            '--rng-seed', type=int, default=config.BENCH_RNG_SEED,
            help='Seed of the mutation random generator'
        )
        parser.add_argument(
            '--oracle', action='store_true',
            help='Also compare indexed detection with brute force on synthetic corpora'
        )
        parser.add_argument(
            '--throughput-kloc', type=float, default=None,
            help='Also index and query a generated Java corpus of this many thousand lines'
        )
        parser.add_argument(
            '--json', action='store_true', default=None,
            help='Print all results as one JSON document'
        )

    def handle(self, *args, **options):
        cli = self.build_config(options)
        if not 0.0 <= options['edit_fraction'] <= 0.3:
            raise CommandError("--edit-fraction must be within [0, 0.3]", returncode=2)
        cfg = cli.detection()

        results = {}
        with translate_errors():
            methods = load_seed_methods(options['seeds'], min_tokens=cfg.min_tokens)
            recall = run_recall(methods, cfg, options['per_type'], options['edit_fraction'],
                                options['rng_seed'])
        results['recall'] = recall.table()

        oracle = None
        if options['oracle']:
            oracle = run_oracle_suite(scope=cfg.scope)
            results['oracle'] = oracle.table()

        throughput = None
        if options['throughput_kloc']:
            throughput = run_throughput(options['throughput_kloc'], cfg, options['rng_seed'])

        if cli.json_output:
            document = {name: json.loads(table.to_json(orient='records')) for name, table in results.items()}
            if throughput is not None:
                document['throughput'] = throughput
            self.stdout.write(json.dumps(document, indent=2))
        else:
            self.stdout.write(f"Recall over {min(len(methods), options['per_type'])} seed methods (theta={cfg.theta})")
            self.stdout.write(results['recall'].to_string(index=False))
            if oracle is not None:
                failures = results['oracle'][results['oracle']['discrepancies'] > 0]
                self.stdout.write(f"Oracle suite: {len(oracle.rows)} runs, {len(failures)} with discrepancies")
                if not failures.empty:
                    self.stdout.write(failures.to_string(index=False))
            if throughput is not None:
                self.stdout.write("Throughput:")
                for key, value in throughput.items():
                    self.stdout.write(f"  {key}: {value}")
                verdict = 'PASS' if throughput['passed'] else 'FAIL'
                self.stdout.write(
                    f"Throughput verdict: {verdict} (index {throughput['index_seconds']}s of "
                    f"{throughput['index_budget_seconds']}s, query p95 {throughput['query_p95_ms']}ms of "
                    f"{throughput['query_p95_limit_ms']}ms)"
                )

        if oracle is not None and not oracle.passed:
            raise CommandError("Indexed detection disagrees with brute force", returncode=EXIT_BENCH_FAILED)
        if throughput is not None and not throughput['passed']:
            raise CommandError("Throughput is below target", returncode=EXIT_BENCH_FAILED)
