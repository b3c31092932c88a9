import logging
import sys

from clonedex.config import config
from clonedex.corpus import discover_files
from clonedex.exceptions import IndexNotLoaded
from clonedex.index import CloneIndex
from clonedex.service import CloneService, set_service
from clonedex.storage import load_index, save_index
from clonedex.watcher import start_observer

from ._options import (
    CloneCommand,
    add_detection_arguments,
    add_index_argument,
    add_roots_argument,
    index_conflicts,
    translate_errors,
)

logger = logging.getLogger(__name__)


class Command(CloneCommand):
    help = 'Keep the index current while files change and answer clone queries'
    subcommand = 'watch'
    stealth_options = ('stdin',)

    def add_arguments(self, parser):
        add_roots_argument(parser)
        add_detection_arguments(parser)
        add_index_argument(parser)
        parser.add_argument(
            '--debounce-ms', type=int, default=None,
            help=f'Quiet period before a changed file is re-indexed (default {config.DEBOUNCE_MS})'
        )
        transport = parser.add_mutually_exclusive_group()
        transport.add_argument(
            '--stdio', action='store_true',
            help='Read NDJSON requests from stdin and answer on stdout'
        )
        transport.add_argument(
            '--socket', default=None,
            help=f'Serve NDJSON requests on this Unix socket (default {config.SOCKET_PATH})'
        )

    def prepare_index(self, cli, path: str) -> CloneIndex:
        """Saved index brought in line with the files on disk, or a fresh build

        A saved index built with other granularity, min-tokens or normalization
        settings than the ones asked for is rebuilt from scratch.
        """
        files = discover_files(cli.roots, cli.project_layout, cli.languages)
        try:
            index = load_index(path)
        except IndexNotLoaded:
            index = CloneIndex.build(files, cli.detection())
            save_index(index, path)
            return index

        conflicts = index_conflicts(index, cli, self.explicit)
        if conflicts:
            logger.warning(f"Rebuilding {path}: {', '.join(conflicts)}")
            index = CloneIndex.build(files, cli.detection())
        else:
            if "theta" in self.explicit:
                index = index.retarget(cli.theta)
            changed = [result for result in index.rescan(files) if result.changed]
            logger.info(f"Rescan after load updated {len(changed)} file(s)")
        save_index(index, path)
        return index

    def handle(self, *args, **options):
        cli = self.build_config(options)
        roots = self.require_roots(cli)
        path = self.index_path(cli)

        with translate_errors():
            index = self.prepare_index(cli, path)
            service = CloneService(index, roots, cli.project_layout, cli.scope,
                                   cli.debounce_ms, index_path=path)
            observer = start_observer(roots, service)
        set_service(service)
        service.start()
        server = None
        try:
            if options['stdio']:
                service.serve_stdio(options.get('stdin') or sys.stdin, self.stdout)
            else:
                socket_path = options['socket'] or config.SOCKET_PATH
                server = service.make_socket_server(socket_path)
                self.stdout.write(f"Serving clone queries on {socket_path}")
                server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            observer.stop()
            observer.join()
            service.stop()
            service.apply_pending(now=float('inf'))
            if server is not None:
                server.server_close()
            set_service(None)
