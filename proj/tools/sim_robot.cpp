// Simulated differential-drive robot speaking the rosbridge protocol.

#include <iostream>

#include <CLI11.hpp>

#include "caris/sim/server.hpp"
#include "caris/sim/world.hpp"
#include "wait_signal.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulated robot: /cmd_vel and /tts in, /scan and /odom out"};
  std::string world_file;
  std::string address = "127.0.0.1";
  unsigned short port = 9090;
  bool realtime = false;
  app.add_option("--world", world_file, "world JSON file")->required()->check(CLI::ExistingFile);
  app.add_option("--port", port, "listen port (0 = ephemeral)");
  app.add_option("--address", address, "listen address");
  app.add_flag("--realtime", realtime, "advance the clock with wall time instead of /sim/step");
  CLI11_PARSE(app, argc, argv);

  const auto signals = block_stop_signals();
  try {
    caris::sim::SimServer::Options options;
    options.address = address;
    options.port = port;
    options.realtime = realtime;
    caris::sim::SimServer server(caris::sim::load_world(world_file), caris::sim::SimParams{}, options);
    server.set_speech_observer([](const std::string& text) { std::cout << "say: " << text << std::endl; });
    server.start();
    std::cout << "sim-robot listening on " << server.url() << (realtime ? " (realtime)" : " (lockstep)") << std::endl;
    wait_stop_signal(signals);
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "sim-robot: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
