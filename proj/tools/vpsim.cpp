// Command-line entry point: run the study service, check study material,
// render prompts and export collected data.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "vpsim/config.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/illness_script.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/service.hpp"
#include "vpsim/study.hpp"

namespace {

using namespace vpsim;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  if (const auto* v = dynamic_cast<const ValidationError*>(&e))
    for (const auto& line : v->violations()) std::cerr << "  - " << line << "\n";
}

int serve(const std::string& config_path, bool quiet) {
  const auto config = load_api_config_file(config_path);
  auto options = options_from_config(config);
  if (options.admin_token.empty())
    std::cerr << "warning: " << config.admin_token_ref << " is not set, admin routes are disabled\n";
  if (!quiet) options.log = [](const std::string& line) { std::cerr << line << "\n"; };

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(std::move(options));
  const int port = service.bind(config.host(), config.port());
  std::cerr << "listening on " << config.host() << ":" << port << "\n";

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.listen();
  // listen() also returns when the server fails; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

int validate(const std::string& storage, const std::vector<std::string>& locales) {
  const auto material = load_study_material(storage, locales);
  std::cout << "manifest: " << material.manifest->categories.size() << " categories\n";
  for (const auto& locale : material.scripts->locales()) {
    for (auto style : material.scripts->styles_for(locale)) {
      const auto* s = material.scripts->find(style, locale);
      std::cout << "script " << s->script_id << ": " << to_string(style) << ", " << locale << ", "
                << s->persona.first_name << " " << s->persona.last_name << "\n";
    }
  }
  for (const auto& [locale, q] : material.questionnaires)
    std::cout << "questionnaire " << locale << ": " << q.items.size() << " items\n";
  if (material.adjective_map)
    std::cout << "adjective map: " << material.adjective_map->entries.size() << " adjectives\n";
  std::cout << "ok\n";
  return 0;
}

int render(const std::string& script_path, const std::string& manifest_path, const std::string& what,
           const std::string& user_text) {
  auto manifest = std::make_shared<const CategoryManifest>(load_manifest_file(manifest_path));
  const auto script = load_script_file(script_path, manifest);
  if (what == "short") std::cout << render_short_case(script) << "\n";
  else if (what == "full") std::cout << render_full_case(script) << "\n";
  else std::cout << to_canonical_json(assemble(script, {}, user_text)) << "\n";
  return 0;
}

int export_offline(const std::string& config_path, const std::string& out) {
  const auto config = load_api_config_file(config_path);
  Service service(options_from_config(config));
  for (const auto& f : export_dataset(service.export_input(), out)) std::cout << f << "\n";
  return 0;
}

int metrics(const std::string& config_path) {
  const auto config = load_api_config_file(config_path);
  Service service(options_from_config(config));
  std::cout << compute_metrics_json(service.export_input());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual-patient study service and tools"};
  app.require_subcommand(1);

  std::string config_path = "config/vpsim.json";
  bool quiet = false;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
  serve_cmd->add_flag("-q,--quiet", quiet, "No request log");

  std::string storage = "data";
  std::vector<std::string> locales{"en", "de"};
  auto* validate_cmd = app.add_subcommand("validate", "Load and check scripts, questionnaires and maps");
  validate_cmd->add_option("-s,--storage", storage, "Storage directory")->check(CLI::ExistingDirectory);
  validate_cmd->add_option("-l,--locales", locales, "Locales to load");

  std::string script_path, manifest_path = "data/category_manifest.json", what = "plan";
  std::string user_text = "Hello, what brings you here today?";
  auto* render_cmd = app.add_subcommand("render", "Print the rendered case or first-turn prompt plan");
  render_cmd->add_option("script", script_path, "Illness script file")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("-m,--manifest", manifest_path, "Category manifest")->check(CLI::ExistingFile);
  render_cmd->add_option("-w,--what", what, "short, full or plan")
      ->check(CLI::IsMember({"short", "full", "plan"}));
  render_cmd->add_option("-u,--user", user_text, "First participant message for the plan");

  std::string out_dir = "export";
  auto* export_cmd = app.add_subcommand("export", "Write the export bundle from stored records");
  export_cmd->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
  export_cmd->add_option("-o,--out", out_dir, "Output directory");

  auto* metrics_cmd = app.add_subcommand("metrics", "Print study metrics from stored records");
  metrics_cmd->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(config_path, quiet);
    if (*validate_cmd) return validate(storage, locales);
    if (*render_cmd) return render(script_path, manifest_path, what, user_text);
    if (*export_cmd) return export_offline(config_path, out_dir);
    if (*metrics_cmd) return metrics(config_path);
  } catch (const std::exception& e) {
    print_error(e);
    return 1;
  }
  return 0;
}
