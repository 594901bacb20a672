// Copyright 2026 The CDI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// cdi-admission: long-running admission endpoint. SIGHUP reloads the policy.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <chrono>
#include <iostream>
#include <thread>

#include "cdi/admission.hpp"

namespace {

std::atomic<bool> g_reload{false};
std::atomic<bool> g_stop{false};

extern "C" void OnSignal(int sig) {
  if (sig == SIGHUP) {
    g_reload = true;
  } else {
    g_stop = true;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CDI admission service"};
  cdi::AdmissionOptions options;
  std::string bind = "127.0.0.1:8080";
  std::string policy;
  app.add_option("--policy", policy, "Policy JSON file")->required();
  app.add_option("--bind", bind, "HOST:PORT to listen on (port 0 picks a free port)");
  app.add_option("--max-bundle-bytes", options.max_bundle_bytes, "Request body limit");
  app.add_option("--threads", options.verify_threads, "Verification threads per request");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }
  options.policy_path = policy;

  auto colon = bind.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "cdi-admission: --bind must be HOST:PORT\n";
    return 3;
  }
  std::string host = bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    std::cerr << "cdi-admission: bad port in --bind\n";
    return 3;
  }

  std::unique_ptr<cdi::AdmissionService> service;
  try {
    service = std::make_unique<cdi::AdmissionService>(options);
  } catch (const std::exception& e) {
    std::cerr << "cdi-admission: " << e.what() << "\n";
    return 3;
  }

  if (port == 0) {
    port = service->BindToAnyPort(host);
  } else if (!service->BindToPort(host, port)) {
    port = -1;
  }
  if (port < 0) {
    std::cerr << "cdi-admission: cannot bind " << bind << "\n";
    return 3;
  }

  std::signal(SIGHUP, OnSignal);
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);

  std::thread server([&] { service->ListenAfterBind(); });
  service->WaitUntilReady();
  std::cout << cdi::Json{{"listening", host + ":" + std::to_string(port)},
                         {"policy_id", service->snapshot()->policy_id.Hex()}}
                   .dump()
            << std::endl;

  while (!g_stop) {
    if (g_reload.exchange(false)) service->HandleReload();
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  service->Stop();
  server.join();
  return 0;
}
