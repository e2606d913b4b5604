#include <CLI11.hpp>

#include <iostream>

#include "beboin/api.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Trial-conduct HTTP service", "beboin-server"};
  std::string data_dir = "beboin-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  int snapshot_every = 16;
  app.add_option("--data", data_dir, "directory holding the per-trial event logs");
  app.add_option("--host", host, "listen address");
  app.add_option("--port", port, "listen port");
  app.add_option("--snapshot-every", snapshot_every, "write a state snapshot every N versions");
  CLI11_PARSE(app, argc, argv);

  try {
    beboin::TrialService service(data_dir, snapshot_every);
    return beboin::serve(service, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error[startup]: " << e.what() << "\n";
    return 1;
  }
}
