// Stand-alone mock verifier/segmenter speaking the line protocol on stdio.
// The fault flags exist to exercise the caller's error handling.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "glasslabel/ports.hpp"

int main(int argc, char** argv) {
  CLI::App app{"glasslabel mock plugin"};
  std::string fault = "none";
  app.add_option("--fault", fault, "none | hang | garbage | exit | wrong-id")
      ->check(CLI::IsMember({"none", "hang", "garbage", "exit", "wrong-id"}));
  CLI11_PARSE(app, argc, argv);

  std::ios::sync_with_stdio(false);
  if (fault == "none") {
    glasslabel::serve_mock_plugin(std::cin, std::cout);
    return 0;
  }
  std::string line;
  while (std::getline(std::cin, line)) {
    if (fault == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    } else if (fault == "garbage") {
      std::cout << "this is not json\n" << std::flush;
    } else if (fault == "exit") {
      return 1;
    } else {
      auto response = glasslabel::handle_mock_request(line);
      const auto& id = response["id"];
      response["id"] = "not-" + (id.is_string() ? id.get<std::string>() : std::string());
      std::cout << response.dump() << "\n" << std::flush;
    }
  }
  return 0;
}
