"""Boot a real HTTP node on a local port and run the load harness against it,
the same measurement the `pqballot-bench` CLI performs.

Run:  python demos/05_load_bench.py          (takes ~1 minute)
"""

import socket
import tempfile
import threading
import time

import uvicorn

from pqballot import bench, service

with socket.socket() as probe:
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]

config = service.NodeConfig(data_dir=tempfile.mkdtemp(), port=port)
print("building node (includes one-time key generation)...")
node, metrics = service.build_node(config)
app = service.create_app(node, metrics)
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                       log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
url = f"http://127.0.0.1:{port}"
print(f"node is serving at {url}\n")

report = bench.run_load(url, levels=(1, 10, 20), ops_per_level=10)
print(bench.render_report(report, "table"))

failures = bench.check_properties(report)
print("properties:", "all hold" if not failures else failures)

server.should_exit = True
thread.join(timeout=5)
