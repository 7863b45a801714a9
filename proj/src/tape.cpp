#include "semigrad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace semigrad {

std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::Input: return "input";
    case OpKind::Const: return "const";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Neg: return "neg";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Pow: return "pow";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Max2: return "max2";
    case OpKind::Id: return "id";
    case OpKind::PeekMax: return "peekmax";
    case OpKind::Opaque: return "opaque";
  }
  return "unknown";
}

OpKind op_from_name(std::string_view name) {
  static const std::pair<std::string_view, OpKind> table[] = {
      {"input", OpKind::Input}, {"const", OpKind::Const}, {"add", OpKind::Add},
      {"sub", OpKind::Sub},     {"mul", OpKind::Mul},     {"div", OpKind::Div},
      {"neg", OpKind::Neg},     {"exp", OpKind::Exp},     {"log", OpKind::Log},
      {"pow", OpKind::Pow},     {"tanh", OpKind::Tanh},   {"relu", OpKind::Relu},
      {"max2", OpKind::Max2},   {"id", OpKind::Id},       {"peekmax", OpKind::PeekMax},
      {"opaque", OpKind::Opaque}};
  for (const auto& [n, k] : table) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown op: " + std::string(name));
}

int op_arity(OpKind k) {
  switch (k) {
    case OpKind::Input:
    case OpKind::Const:
    case OpKind::PeekMax:
      return 0;
    case OpKind::Neg:
    case OpKind::Exp:
    case OpKind::Log:
    case OpKind::Tanh:
    case OpKind::Relu:
    case OpKind::Id:
      return 1;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div:
    case OpKind::Pow:
    case OpKind::Max2:
      return 2;
    case OpKind::Opaque:
      return -1;
  }
  return -1;
}

void Tape::check_node(NodeId n, const char* role) const {
  if (n < 0 || static_cast<std::size_t>(n) >= op_.size()) {
    throw std::out_of_range(std::string(role) + " node id " + std::to_string(n) +
                            " not on tape of size " + std::to_string(op_.size()));
  }
}

NodeId Tape::append(OpKind k, int arity, NodeId a, NodeId b) {
  const NodeId id = static_cast<NodeId>(op_.size());
  op_.push_back(k);
  arity_.push_back(static_cast<std::uint8_t>(arity));
  parents_.push_back({a, b});
  partials_.push_back({0.0, 0.0});
  value_.push_back(0.0);
  edges_ += static_cast<std::size_t>(arity);
  evaluated_ = false;
  return id;
}

NodeId Tape::add_input(double value) {
  const NodeId id = append(OpKind::Input, 0, kNoNode, kNoNode);
  value_[static_cast<std::size_t>(id)] = value;
  input_ids_.push_back(id);
  return id;
}

NodeId Tape::add_const(double value) {
  const NodeId id = append(OpKind::Const, 0, kNoNode, kNoNode);
  value_[static_cast<std::size_t>(id)] = value;
  return id;
}

NodeId Tape::add_unary(OpKind k, NodeId a) {
  if (op_arity(k) != 1) throw std::invalid_argument(std::string(op_name(k)) + " is not unary");
  check_node(a, "parent");
  return append(k, 1, a, kNoNode);
}

NodeId Tape::add_binary(OpKind k, NodeId a, NodeId b) {
  if (op_arity(k) != 2) throw std::invalid_argument(std::string(op_name(k)) + " is not binary");
  check_node(a, "parent");
  check_node(b, "parent");
  return append(k, 2, a, b);
}

NodeId Tape::add_peek_max(std::vector<NodeId> sources) {
  if (sources.empty()) throw std::invalid_argument("peekmax needs at least one source");
  for (NodeId s : sources) check_node(s, "peek source");
  const NodeId id = append(OpKind::PeekMax, 0, kNoNode, kNoNode);
  peek_.emplace(id, std::move(sources));
  return id;
}

NodeId Tape::add_raw(std::span<const NodeId> parents, std::span<const double> partials) {
  if (parents.size() != partials.size()) {
    throw std::invalid_argument("raw node: one partial per parent required");
  }
  if (parents.size() > 2) throw std::invalid_argument("raw node: arity > 2 unsupported");
  for (NodeId p : parents) check_node(p, "parent");
  if (parents.empty()) return add_input(0.0);
  const NodeId id = append(OpKind::Opaque, static_cast<int>(parents.size()),
                           parents[0], parents.size() > 1 ? parents[1] : kNoNode);
  auto& slot = partials_[static_cast<std::size_t>(id)];
  slot[0] = partials[0];
  if (partials.size() > 1) slot[1] = partials[1];
  return id;
}

void Tape::set_output(NodeId id) {
  check_node(id, "output");
  output_ = id;
}

void Tape::set_parent(NodeId node, int slot, NodeId parent) {
  check_node(node, "node");
  check_node(parent, "parent");
  if (slot < 0 || slot >= arity(node)) throw std::out_of_range("parent slot out of range");
  if (parent >= node) throw std::invalid_argument("parent must precede the node");
  parents_[static_cast<std::size_t>(node)][slot] = parent;
  evaluated_ = false;
}

const std::vector<NodeId>& Tape::peek_sources(NodeId n) const {
  auto it = peek_.find(n);
  if (it == peek_.end()) throw std::out_of_range("node has no peek sources");
  return it->second;
}

void Tape::set_input(std::size_t input_index, double v) {
  value_[static_cast<std::size_t>(input_ids_.at(input_index))] = v;
  evaluated_ = false;
}

double Tape::input_value(std::size_t input_index) const {
  return value_[static_cast<std::size_t>(input_ids_.at(input_index))];
}

void Tape::clear() {
  op_.clear();
  arity_.clear();
  parents_.clear();
  partials_.clear();
  value_.clear();
  input_ids_.clear();
  peek_.clear();
  output_ = kNoNode;
  edges_ = 0;
  evaluated_ = false;
}

double Tape::forward(std::span<const double> input_values) {
  if (input_values.size() != input_ids_.size()) {
    throw std::invalid_argument("forward: expected " + std::to_string(input_ids_.size()) +
                                " input values, got " + std::to_string(input_values.size()));
  }
  for (std::size_t i = 0; i < input_values.size(); ++i) {
    value_[static_cast<std::size_t>(input_ids_[i])] = input_values[i];
  }
  return forward();
}

double Tape::forward() {
  if (output_ == kNoNode) throw std::logic_error("forward: no output node set");
  const std::size_t n = op_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& par = parents_[i];
    auto& pt = partials_[i];
    const double a = par[0] >= 0 ? value_[static_cast<std::size_t>(par[0])] : 0.0;
    const double b = par[1] >= 0 ? value_[static_cast<std::size_t>(par[1])] : 0.0;
    switch (op_[i]) {
      case OpKind::Input:
      case OpKind::Const:
        break;
      case OpKind::Add:
        value_[i] = a + b;
        pt[0] = 1.0;
        pt[1] = 1.0;
        break;
      case OpKind::Sub:
        value_[i] = a - b;
        pt[0] = 1.0;
        pt[1] = -1.0;
        break;
      case OpKind::Mul:
        value_[i] = a * b;
        pt[0] = b;
        pt[1] = a;
        break;
      case OpKind::Div:
        if (b == 0.0) throw EvalError(static_cast<NodeId>(i), "division by zero");
        value_[i] = a / b;
        pt[0] = 1.0 / b;
        pt[1] = -a / (b * b);
        break;
      case OpKind::Neg:
        value_[i] = -a;
        pt[0] = -1.0;
        break;
      case OpKind::Exp:
        value_[i] = std::exp(a);
        pt[0] = value_[i];
        break;
      case OpKind::Log:
        if (a <= 0.0) throw EvalError(static_cast<NodeId>(i), "log of non-positive value");
        value_[i] = std::log(a);
        pt[0] = 1.0 / a;
        break;
      case OpKind::Pow:
        if (a <= 0.0) throw EvalError(static_cast<NodeId>(i), "pow of non-positive base");
        value_[i] = std::pow(a, b);
        pt[0] = b * std::pow(a, b - 1.0);
        pt[1] = value_[i] * std::log(a);
        break;
      case OpKind::Tanh:
        value_[i] = std::tanh(a);
        pt[0] = 1.0 - value_[i] * value_[i];
        break;
      case OpKind::Relu:
        value_[i] = a > 0.0 ? a : 0.0;
        pt[0] = a > 0.0 ? 1.0 : 0.0;
        break;
      case OpKind::Max2:
        value_[i] = a >= b ? a : b;
        pt[0] = a >= b ? 1.0 : 0.0;
        pt[1] = a >= b ? 0.0 : 1.0;
        break;
      case OpKind::Id:
        value_[i] = a;
        pt[0] = 1.0;
        break;
      case OpKind::PeekMax: {
        const auto& src = peek_.at(static_cast<NodeId>(i));
        double m = value_[static_cast<std::size_t>(src[0])];
        for (std::size_t j = 1; j < src.size(); ++j) {
          m = std::max(m, value_[static_cast<std::size_t>(src[j])]);
        }
        value_[i] = m;
        break;
      }
      case OpKind::Opaque:
        throw EvalError(static_cast<NodeId>(i), "opaque node is not forward-evaluable");
    }
  }
  evaluated_ = true;
  return value_[static_cast<std::size_t>(output_)];
}

// ---------------------------------------------------------------------------
// Text export/import.
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kTapeHeader = "semigrad-tape v1";

void print_double(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}
}  // namespace

void Tape::export_text(std::ostream& out) const {
  out << kTapeHeader << "\n";
  for (std::size_t i = 0; i < op_.size(); ++i) {
    out << "n " << i << ' ' << op_name(op_[i]) << ' ';
    print_double(out, value_[i]);
    out << ' ' << static_cast<int>(arity_[i]);
    for (int s = 0; s < arity_[i]; ++s) out << ' ' << parents_[i][s];
    for (int s = 0; s < arity_[i]; ++s) {
      out << ' ';
      print_double(out, partials_[i][s]);
    }
    out << "\n";
  }
  for (const auto& [id, src] : peek_) {
    out << "peek " << id << ' ' << src.size();
    for (NodeId s : src) out << ' ' << s;
    out << "\n";
  }
  out << "output " << output_ << "\n";
  out << "end\n";
}

Tape Tape::import_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTapeHeader) {
    throw std::runtime_error("tape import: missing or unsupported header");
  }
  Tape t;
  std::size_t lineno = 1;
  bool done = false;
  std::vector<std::pair<NodeId, std::vector<NodeId>>> peeks;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    auto fail = [&](const std::string& msg) -> std::runtime_error {
      return std::runtime_error("tape import line " + std::to_string(lineno) + ": " + msg);
    };
    if (tag == "n") {
      long id = -1;
      std::string opn;
      double value = 0.0;
      int arity = 0;
      if (!(ls >> id >> opn >> value >> arity)) throw fail("malformed node record");
      if (id != static_cast<long>(t.op_.size())) throw fail("node ids must be dense and ordered");
      if (arity < 0 || arity > 2) throw fail("arity out of range");
      const OpKind k = op_from_name(opn);
      std::array<NodeId, 2> par{kNoNode, kNoNode};
      std::array<double, 2> pt{0.0, 0.0};
      for (int s = 0; s < arity; ++s) {
        long p;
        if (!(ls >> p)) throw fail("missing parent id");
        if (p < 0 || p >= id) throw fail("parent must precede node");
        par[s] = static_cast<NodeId>(p);
      }
      for (int s = 0; s < arity; ++s) {
        if (!(ls >> pt[s])) throw fail("missing partial");
      }
      const NodeId nid = t.append(k, arity, par[0], par[1]);
      t.value_[static_cast<std::size_t>(nid)] = value;
      t.partials_[static_cast<std::size_t>(nid)] = pt;
      if (k == OpKind::Input) t.input_ids_.push_back(nid);
    } else if (tag == "peek") {
      long id = -1;
      std::size_t count = 0;
      if (!(ls >> id >> count)) throw fail("malformed peek record");
      std::vector<NodeId> src(count);
      for (auto& s : src) {
        long v;
        if (!(ls >> v)) throw fail("missing peek source");
        s = static_cast<NodeId>(v);
      }
      peeks.emplace_back(static_cast<NodeId>(id), std::move(src));
    } else if (tag == "output") {
      long id;
      if (!(ls >> id)) throw fail("malformed output record");
      t.set_output(static_cast<NodeId>(id));
    } else if (tag == "end") {
      done = true;
      break;
    } else {
      throw fail("unknown record tag '" + tag + "'");
    }
  }
  if (!done) throw std::runtime_error("tape import: missing end marker");
  if (t.output_ == kNoNode) throw std::runtime_error("tape import: no output node");
  for (auto& [id, src] : peeks) {
    t.check_node(id, "peek");
    t.peek_.emplace(id, std::move(src));
  }
  // Imported tapes carry cached values and partials, so backward passes and
  // the path oracle can run without re-evaluation.
  t.evaluated_ = true;
  return t;
}

}  // namespace semigrad
