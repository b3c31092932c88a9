from pathlib import Path

from django.core.management.base import CommandError

from clonedex.config import config
from clonedex.corpus import discover_files
from clonedex.detector import detect_indexed
from clonedex.index import CloneIndex
from clonedex.reporter import write_pairs
from clonedex.storage import load_index

from ._options import (
    EXIT_USAGE,
    CloneCommand,
    add_detection_arguments,
    add_index_argument,
    add_output_arguments,
    add_roots_argument,
    translate_errors,
)


class Command(CloneCommand):
    help = 'Report every clone pair of a saved index, or of --roots indexed on the fly'
    subcommand = 'detect'

    def add_arguments(self, parser):
        add_roots_argument(parser)
        add_detection_arguments(parser)
        add_index_argument(parser)
        add_output_arguments(parser)

    def load_or_build(self, cli) -> CloneIndex:
        """An explicit --index wins; otherwise --roots are indexed in memory; otherwise the default index"""
        if cli.index_path:
            return self.check_index(load_index(cli.index_path), cli)
        if cli.roots:
            files = discover_files(cli.roots, cli.project_layout, cli.languages)
            return CloneIndex.build(files, cli.detection())
        if not Path(config.INDEX_PATH).is_file():
            raise CommandError(
                f"No index at {config.INDEX_PATH} and no --roots given; run `index` first",
                returncode=EXIT_USAGE,
            )
        return self.check_index(load_index(config.INDEX_PATH), cli)

    def handle(self, *args, **options):
        cli = self.build_config(options)
        with translate_errors():
            index = self.load_or_build(cli)
            pairs = detect_indexed(index, cli.scope, cli.workers)
            if cli.out:
                write_pairs(pairs, cli.output_format, sink=cli.out)
                self.stderr.write(f"Wrote {len(pairs)} clone pairs to {cli.out}")
            else:
                write_pairs(pairs, cli.output_format, stream=self.stdout)
