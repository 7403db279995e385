import threading

import pytest

from semcom_adapter.config import AdapterConfig
from semcom_adapter.server import AdapterServer, AdapterService


@pytest.fixture
def adapter_server():
    servers = []

    def _start(models=None):
        config = AdapterConfig.from_json({"listen": "127.0.0.1:0",
                                          "models": models or {}})
        server = AdapterServer(AdapterService(config))
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return server.endpoint

    yield _start
    for server in servers:
        server.shutdown()
        server.server_close()
