import time

from clonedex.corpus import discover_files
from clonedex.index import CloneIndex
from clonedex.storage import save_index

from ._options import (
    CloneCommand,
    add_detection_arguments,
    add_index_argument,
    add_roots_argument,
    translate_errors,
)


class Command(CloneCommand):
    help = 'Walk source roots, build the clone index and save it'
    subcommand = 'index'

    def add_arguments(self, parser):
        add_roots_argument(parser)
        add_detection_arguments(parser)
        add_index_argument(parser)

    def handle(self, *args, **options):
        cli = self.build_config(options)
        roots = self.require_roots(cli)
        path = self.index_path(cli)

        started = time.perf_counter()
        with translate_errors():
            files = discover_files(roots, cli.project_layout, cli.languages)
            index = CloneIndex.build(files, cli.detection())
            save_index(index, path)
        elapsed = time.perf_counter() - started

        stats = index.stats()
        self.stdout.write(self.style.SUCCESS(
            f"Indexed {stats['files']} files: {stats['blocks']} blocks, {stats['tokens']} tokens, "
            f"{stats['postings']} postings in {elapsed:.2f}s -> {path}"
        ))
