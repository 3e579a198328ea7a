#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <new>
#include <string_view>
#include <thread>

#include "ant/error.hpp"
#include "commands.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kCompute = 4;

// Hardware concurrency, capped by ANT_THREADS when set.
std::size_t resolve_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ANT_THREADS"); env && *env) {
    const std::string_view s(env);
    std::size_t cap = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec != std::errc() || end != s.data() + s.size() || cap == 0) {
      throw ant::UsageError("ANT_THREADS must be a positive integer, got '" + std::string(s) + "'");
    }
    n = std::min(n, cap);
  }
  return n;
}

int exit_code(ant::ErrorKind k) {
  switch (k) {
    case ant::ErrorKind::usage: return kUsage;
    case ant::ErrorKind::data: return kData;
    case ant::ErrorKind::compute: return kCompute;
  }
  return kCompute;
}

void report_error(const char* what) { std::fprintf(stderr, "ant: error: %s\n", what); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial network traffic toolkit", "ant"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ant 0.1.0");

  ant::cli::Global global;
  app.add_flag("-q,--quiet", global.quiet, "Silence progress output on stderr");

  try {
    global.threads = resolve_threads();
    ant::cli::add_synth(app, global);
    ant::cli::add_ingest(app, global);
    ant::cli::add_train(app, global);
    ant::cli::add_eval(app, global);
    ant::cli::add_attack(app, global);
    ant::cli::add_transfer(app, global);
    ant::cli::add_report(app, global);
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const ant::Error& e) {
    report_error(e.what());
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(e.what());
    return kData;
  } catch (const std::bad_alloc&) {
    report_error("out of memory");
    return kCompute;
  } catch (const std::exception& e) {
    report_error(e.what());
    return kCompute;
  }
  return 0;
}
