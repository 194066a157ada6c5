// The wizard-side server: robot bridge, tracker, mapper, conversation,
// recorder and the console, behind one HTTP listener.

#include <iostream>

#include <CLI11.hpp>

#include "caris/gateway/gateway.hpp"
#include "wait_signal.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Wizard-of-Oz robot control server"};
  caris::gateway::GatewayConfig config;
  std::string scenario_file;
  std::string clock = "steady";
  int llm_timeout_ms = 30000;
  app.add_option("--robot", config.robot_url, "rosbridge endpoint, e.g. ws://127.0.0.1:9090 (omit to run without a robot)");
  app.add_option("--scenario", scenario_file, "scenario JSON file")->required()->check(CLI::ExistingFile);
  app.add_option("--storage", config.storage, "directory that receives sessions/")->required();
  app.add_option("--listen", config.listen, "host:port for the console and API")->capture_default_str();
  app.add_option("--scenarios", config.scenario_dir, "directory listed by GET /scenarios (default: the scenario's)");
  app.add_option("--state-hz", config.state_hz, "WebSocket /state rate")->capture_default_str()->check(CLI::Range(0.5, 200.0));
  app.add_option("--llm-timeout-ms", llm_timeout_ms, "model call timeout")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--clock", clock, "event timestamps: steady or robot (odometry stamps)")
      ->capture_default_str()
      ->check(CLI::IsMember({"steady", "robot"}));
  CLI11_PARSE(app, argc, argv);

  const auto signals = block_stop_signals();
  try {
    config.scenario = caris::conversation::load_scenario(scenario_file);
    if (config.scenario_dir.empty()) config.scenario_dir = std::filesystem::path(scenario_file).parent_path();
    config.clock = clock == "robot" ? caris::gateway::ClockSource::Robot : caris::gateway::ClockSource::Steady;
    config.conversation.timeout = std::chrono::milliseconds(llm_timeout_ms);
    caris::gateway::Gateway gateway(config);
    gateway.start();
    std::cout << "caris-server: console at " << gateway.url() << "/\n"
              << "caris-server: recording to " << gateway.session().directory().string() << std::endl;
    if (!config.robot_url.empty() && !gateway.robot_connected()) {
      std::cout << "caris-server: robot at " << config.robot_url << " not reachable yet, retrying" << std::endl;
    }
    wait_stop_signal(signals);
    gateway.stop();
  } catch (const std::exception& e) {
    std::cerr << "caris-server: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
