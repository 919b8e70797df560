// hoq command-line frontend: check / run / denote / adequacy / tree / corpus.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hoq/denotation.hpp"
#include "hoq/operational.hpp"
#include "hoq/syntax.hpp"
#include "hoq/typing.hpp"

namespace {

using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitBadProgram = 2;

struct Options {
  std::size_t max_steps = 10000;
  std::size_t depth = hoq::kDefaultDepth;
  std::size_t fuel = hoq::kDefaultFuel;
  double tol = 1e-6;
};

std::string slurp(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

hoq::TermPtr load_program(const std::string &path) {
  return hoq::parse(slurp(path));
}

// ----------------------------------------------------------------- DOT ----

std::string dot_escape(const std::string &s, std::size_t max_len = 48) {
  std::string t = s;
  if (t.size() > max_len) t = t.substr(0, max_len - 1) + "…";
  std::string out;
  for (char c : t) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

void dot_operational(std::ostream &os, const hoq::RTree &tree) {
  os << "digraph reduction_tree {\n"
     << "  node [shape=box, fontname=\"monospace\", fontsize=10];\n";
  std::size_t counter = 0;
  // (node id, subtree) work list; edges carry the reduction label.
  struct Item {
    std::size_t id;
    const hoq::RTree *t;
  };
  std::vector<Item> work{{counter++, &tree}};
  os << "  n0 [label=\"" << dot_escape(hoq::print_term(tree.term)) << "\"];\n";
  while (!work.empty()) {
    Item it = work.back();
    work.pop_back();
    for (const hoq::RTree &c : it.t->children) {
      std::size_t cid = counter++;
      os << "  n" << cid << " [label=\"" << dot_escape(hoq::print_term(c.term))
         << "\"];\n";
      os << "  n" << it.id << " -> n" << cid << " [label=\"" << c.label
         << "\"];\n";
      work.push_back({cid, &c});
    }
  }
  os << "}\n";
}

void dot_denotational(std::ostream &os, const hoq::TreeHandle &root,
                      std::size_t depth, std::size_t fuel) {
  constexpr std::size_t kNodeCap = 1024;
  os << "digraph probability_tree {\n"
     << "  node [shape=circle, label=\"\", width=0.12];\n";
  struct Item {
    std::size_t id;
    hoq::TreeHandle node;
    std::size_t depth;
  };
  std::size_t counter = 0;
  std::vector<Item> level{{counter++, root, 0}};
  while (!level.empty() && counter < kNodeCap) {
    std::vector<Item> next;
    for (const Item &it : level) {
      if (it.depth >= depth || counter + 2 > kNodeCap) continue;
      hoq::NodeRead lt = hoq::read_node(it.node, true, fuel);
      hoq::NodeRead rf = hoq::read_node(it.node, false, fuel);
      std::size_t lid = counter++;
      std::size_t rid = counter++;
      os << "  n" << lid << ";\n  n" << rid << ";\n";
      os << "  n" << it.id << " -> n" << lid << " [label=\"tt " << lt.label
         << "\"];\n";
      os << "  n" << it.id << " -> n" << rid << " [label=\"ff " << rf.label
         << "\"];\n";
      if (lt.label == 0.0 && rf.label == 0.0 &&
          lt.exhausted + rf.exhausted > 0.5)
        continue;
      next.push_back({lid, lt.child, it.depth + 1});
      next.push_back({rid, rf.child, it.depth + 1});
    }
    level = std::move(next);
  }
  os << "}\n";
}

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// ------------------------------------------------------------- adequacy ----

struct Report {
  std::string file;
  std::string type;
  hoq::ProbPair op;
  hoq::ProbPair den;
  double dp = 0.0;
  double dq = 0.0;
  bool pass = false;
  bool sound = true;
  std::string error;  // nonempty: parse/type failure
};

json report_json(const Report &r, const Options &o) {
  json j;
  j["schema"] = "hoq-report-1";
  j["file"] = r.file;
  if (!r.error.empty()) {
    j["error"] = r.error;
    return j;
  }
  j["type"] = r.type;
  j["operational"] = {{"p", r.op.p}, {"q", r.op.q}, {"fuel", o.max_steps}};
  j["denotational"] = {
      {"p", r.den.p}, {"q", r.den.q}, {"depth", o.depth}, {"fuel", o.fuel}};
  j["delta"] = {{"p", r.dp}, {"q", r.dq}};
  j["tol"] = o.tol;
  j["sound"] = r.sound;
  j["pass"] = r.pass;
  return j;
}

Report run_adequacy(const std::string &file, const Options &o) {
  Report r;
  r.file = file;
  try {
    hoq::TermPtr m = load_program(file);
    auto d = hoq::check({}, m, hoq::bit_t());
    if (!d) {
      r.error = "program does not typecheck at bit";
      return r;
    }
    r.type = hoq::print_type(d->type);
    r.op = hoq::bigstep(m, o.max_steps);
    r.den = hoq::denote(m, o.depth, o.fuel);
    r.dp = std::abs(r.op.p - r.den.p);
    r.dq = std::abs(r.op.q - r.den.q);
    r.pass = std::max(r.dp, r.dq) <= o.tol;
    // Soundness sweep: every finite-fuel approximant stays below the
    // denotation.  bigstep is monotone in fuel, so the top value bounds all
    // smaller ones; sample powers of two as direct evidence.
    for (std::size_t k = 1; k <= o.max_steps; k *= 2) {
      hoq::ProbPair b = hoq::bigstep(m, k);
      if (b.p > r.den.p + o.tol || b.q > r.den.q + o.tol) r.sound = false;
    }
    if (r.op.p > r.den.p + o.tol || r.op.q > r.den.q + o.tol) r.sound = false;
    if (!r.sound) r.pass = false;
  } catch (const hoq::ParseError &e) {
    r.error = e.what();
  } catch (const std::exception &e) {
    r.error = e.what();
  }
  return r;
}

// --------------------------------------------------------------- corpus ----

int cmd_corpus(const std::string &dir, const Options &o) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto &ent : fs::directory_iterator(dir))
    if (ent.is_regular_file() && ent.path().extension() == ".hoq")
      files.push_back(ent.path().string());
  std::sort(files.begin(), files.end());

  std::vector<std::future<Report>> futs;
  futs.reserve(files.size());
  for (const std::string &f : files)
    futs.push_back(std::async(std::launch::async, run_adequacy, f, o));

  bool all_pass = true;
  std::cout << std::left << std::setw(28) << "file" << std::setw(20)
            << "operational" << std::setw(20) << "denotational" << std::setw(12)
            << "max delta"
            << "result\n";
  for (auto &fut : futs) {
    Report r = fut.get();
    std::ostringstream op, den;
    std::string verdict;
    if (!r.error.empty()) {
      verdict = "ERROR " + r.error;
      all_pass = false;
    } else {
      op << std::fixed << std::setprecision(6) << "(" << r.op.p << ","
         << r.op.q << ")";
      den << std::fixed << std::setprecision(6) << "(" << r.den.p << ","
          << r.den.q << ")";
      verdict = r.pass ? "pass" : (r.sound ? "FAIL" : "FAIL (soundness)");
      all_pass = all_pass && r.pass;
    }
    std::cout << std::left << std::setw(28)
              << fs::path(r.file).filename().string() << std::setw(20)
              << op.str() << std::setw(20) << den.str() << std::setw(12)
              << std::scientific << std::setprecision(2)
              << std::max(r.dp, r.dq) << verdict << "\n";
  }
  return all_pass ? kExitPass : kExitMismatch;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"hoq: a higher-order quantum lambda calculus"};
  app.require_subcommand(1);

  Options opt;
  std::string file, out_dot, tree_dot, mode = "operational";
  bool as_json = false;

  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--fuel", opt.fuel, "token machine loop fuel")
        ->envname("HOQ_FUEL");
    sub->add_option("--depth", opt.depth, "probability tree exploration depth")
        ->envname("HOQ_DEPTH");
    sub->add_option("--tol", opt.tol, "comparison tolerance")
        ->envname("HOQ_TOL");
    sub->add_option("--max-steps", opt.max_steps,
                    "operational big-step fuel");
  };

  CLI::App *c_check = app.add_subcommand("check", "typecheck a program");
  c_check->add_option("file", file)->required();
  c_check->add_flag("--json", as_json);

  CLI::App *c_run =
      app.add_subcommand("run", "operational semantics: big-step at bit");
  c_run->add_option("file", file)->required();
  add_common(c_run);
  c_run->add_option("--tree", tree_dot, "also write the reduction tree (DOT)");
  c_run->add_flag("--json", as_json);

  CLI::App *c_den =
      app.add_subcommand("denote", "denotational semantics: token machine");
  c_den->add_option("file", file)->required();
  add_common(c_den);
  c_den->add_option("--dot", out_dot, "write the explored tree (DOT)");
  c_den->add_flag("--json", as_json);

  CLI::App *c_adq =
      app.add_subcommand("adequacy", "compare both semantics on one program");
  c_adq->add_option("file", file)->required();
  add_common(c_adq);
  c_adq->add_flag("--json", as_json);

  CLI::App *c_tree = app.add_subcommand("tree", "emit a tree as DOT");
  c_tree->add_option("file", file)->required();
  c_tree->add_option("--mode", mode, "operational|denotational")
      ->check(CLI::IsMember({"operational", "denotational"}));
  c_tree->add_option("--out", out_dot, "output path")->required();
  add_common(c_tree);

  CLI::App *c_cor =
      app.add_subcommand("corpus", "run adequacy over a directory of .hoq");
  c_cor->add_option("dir", file)->required();
  add_common(c_cor);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_check->parsed()) {
      hoq::TermPtr m = load_program(file);
      auto d = hoq::infer_principal({}, m);
      if (!d) {
        if (as_json)
          std::cout << json{{"typable", false}}.dump() << "\n";
        else
          std::cout << "untypable\n";
        return kExitMismatch;
      }
      std::string ty = hoq::print_type(d->type);
      if (as_json)
        std::cout << json{{"typable", true}, {"type", ty}}.dump() << "\n";
      else
        std::cout << ty << "\n";
      return kExitPass;
    }

    if (c_run->parsed()) {
      hoq::TermPtr m = load_program(file);
      hoq::ProbPair r = hoq::bigstep(m, opt.max_steps);
      if (!tree_dot.empty()) {
        std::ostringstream ss;
        dot_operational(ss, hoq::reduction_tree(m, opt.max_steps));
        write_file(tree_dot, ss.str());
      }
      std::cout << json{{"p", r.p}, {"q", r.q}, {"fuel", opt.max_steps}}.dump()
                << "\n";
      return kExitPass;
    }

    if (c_den->parsed()) {
      hoq::TermPtr m = load_program(file);
      hoq::TreeHandle t = hoq::tree_of(m);
      hoq::ProbPair r = hoq::prob(t, opt.depth, opt.fuel);
      if (!out_dot.empty()) {
        std::ostringstream ss;
        dot_denotational(ss, t, std::min<std::size_t>(opt.depth, 8), opt.fuel);
        write_file(out_dot, ss.str());
      }
      std::cout << json{{"p", r.p}, {"q", r.q}, {"depth", opt.depth}}.dump()
                << "\n";
      return kExitPass;
    }

    if (c_adq->parsed()) {
      Report r = run_adequacy(file, opt);
      if (!r.error.empty()) {
        std::cerr << "error: " << r.error << "\n";
        return kExitBadProgram;
      }
      std::cout << report_json(r, opt).dump(2) << "\n";
      return r.pass ? kExitPass : kExitMismatch;
    }

    if (c_tree->parsed()) {
      hoq::TermPtr m = load_program(file);
      std::ostringstream ss;
      if (mode == "operational") {
        dot_operational(ss, hoq::reduction_tree(m, opt.max_steps));
      } else {
        dot_denotational(ss, hoq::tree_of(m), opt.depth, opt.fuel);
      }
      write_file(out_dot, ss.str());
      return kExitPass;
    }

    if (c_cor->parsed()) return cmd_corpus(file, opt);
  } catch (const hoq::ParseError &e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitBadProgram;
  } catch (const std::invalid_argument &e) {
    std::cerr << "type error: " << e.what() << "\n";
    return kExitBadProgram;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMismatch;
  }
  return kExitPass;
}
