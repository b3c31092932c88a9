import json
from itertools import groupby

from clonedex.service import CloneQuery, CloneService
from clonedex.storage import load_index

from ._options import CloneCommand, add_index_argument, translate_errors


class Command(CloneCommand):
    help = 'List the clones of the block containing FILE:LINE'
    subcommand = 'query'

    def add_arguments(self, parser):
        parser.add_argument('file', help='Source file path')
        parser.add_argument('line', type=int, help='1-based line number')
        add_index_argument(parser)
        parser.add_argument('--threshold', type=float, default=None,
                            help='Query at another threshold than the index was built with')
        parser.add_argument('--scope', choices=['intra', 'inter', 'both'], default=None,
                            help='Restrict clones to the same or to other projects')
        parser.add_argument('--json', action='store_true', default=None,
                            help='Print the CloneResponse as JSON')
        parser.add_argument('--config', default=None,
                            help='key=value file merged under command-line flags')

    def handle(self, *args, **options):
        cli = self.build_config(options)
        with translate_errors():
            index = self.check_index(load_index(self.index_path(cli)), cli)
            response = CloneService(index, scope=cli.scope).handle_query(
                CloneQuery(options['file'], options['line'])
            )

        if cli.json_output:
            self.stdout.write(json.dumps(response.to_dict(), indent=2))
            return

        block = response.block
        self.stdout.write(
            f"{block.file}:{block.start_line}-{block.end_line} "
            f"[{response.marker.value}] {len(response.clones)} clone(s)"
        )
        clones = sorted(response.clones, key=lambda ref: (ref.project_id, ref.file, ref.start_line))
        for project, by_project in groupby(clones, key=lambda ref: ref.project_id):
            self.stdout.write(f"  {project}")
            for path, by_file in groupby(by_project, key=lambda ref: ref.file):
                self.stdout.write(f"    {path}")
                for ref in by_file:
                    self.stdout.write(f"      lines {ref.start_line}-{ref.end_line}")
