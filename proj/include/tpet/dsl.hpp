#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tpet/ssa.hpp"

namespace tpet::dsl {

// A policy as text, before parsing.
struct PolicySource {
  std::string text;
  std::string name;
  int generation = 0;
};

enum class Feature { Pressure, Queue, Wait, Starvation };
enum class CatFeature { Congestion, Urgency, Imbalance, DominantFlow };
enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };
enum class AggOp { Max, Min, Sum };
enum class SelOp { ArgMax, ArgMin };
enum class BoolOp { And, Or };

const char* feature_name(Feature f);
const char* cat_feature_name(CatFeature f);
const char* cmp_op_name(CmpOp op);

struct NumExpr {
  enum class Kind { Literal, FeatureIndex, Aggregate } kind = Kind::Literal;
  double value = 0;     // Literal
  Feature feature{};    // FeatureIndex / Aggregate
  int index = 0;        // FeatureIndex
  AggOp agg{};          // Aggregate
  bool operator==(const NumExpr&) const = default;
};

// Boolean expression tree. Children are immutable once built; mutation
// rebuilds the affected path.
struct BoolExpr {
  enum class Kind { Compare, CatTest, StarvationTest, Not, Binary } kind = Kind::Compare;
  // Compare
  NumExpr lhs, rhs;
  CmpOp cmp{};
  // CatTest: level codes the category's enum; DominantFlow uses the phase id,
  // -1 for None.
  CatFeature cat{};
  int level = 0;
  // StarvationTest
  int phase = 0;
  // Not (a) / Binary (a op b)
  BoolOp op{};
  std::shared_ptr<const BoolExpr> a, b;

  bool equals(const BoolExpr& other) const;
};

struct PhaseExpr {
  enum class Kind { Literal, Select } kind = Kind::Literal;
  int phase = 0;   // Literal
  SelOp sel{};     // Select
  Feature feature{};
  bool operator==(const PhaseExpr&) const = default;
};

struct Rule {
  BoolExpr cond;
  PhaseExpr target;
};

struct PolicyProgram {
  std::vector<Rule> rules;
  PhaseExpr fallback;  // the mandatory final default
  int phase_count = 0;

  bool equals(const PolicyProgram& other) const;
};

// Legal shape of programs: phase count of the controlled intersections plus
// the structural caps.
struct Signature {
  int phase_count = 4;
  int max_depth = 12;
  int max_rules = 16;
};

struct Diagnostic {
  int line = 1;
  int col = 1;
  std::string code;     // syntax | unknown-feature | unknown-level | phase-range | limit-exceeded
  std::string message;

  std::string to_string() const;
};

struct ParseResult {
  std::optional<PolicyProgram> program;
  Diagnostic error;
  bool ok() const { return program.has_value(); }
};

// The published grammar, embedded in mutation prompts.
const std::string& grammar_ebnf();

ParseResult parse(const PolicySource& source, const Signature& sig);

// First matching rule fires, else the default. Sel>ors break ties to the
// lowest phase index. Total and pure on validated programs.
int evaluate(const PolicyProgram& program, const ssa::StructuredFacts& facts);

// Canonical text; parse(render(p)) is structurally equal to p.
PolicySource render(const PolicyProgram& program);

enum class MutationKind {
  ThresholdPerturb,
  RuleInsert,
  RuleDelete,
  RuleSwap,
  OperatorFlip,
  SelectorSwap
};

const char* mutation_kind_name(MutationKind k);

struct MutationResult {
  PolicyProgram program;
  bool applied = false;
  std::string reason;  // why the edit was a no-op, when it was
};

// One seeded edit of the requested kind; a kind with no applicable site
// reports a no-op with the reason rather than failing.
MutationResult mutate_ast(const PolicyProgram& program, uint64_t seed, MutationKind kind,
                          const Signature& sig);

// Random valid program, for property tests and engine seeding.
PolicyProgram random_program(uint64_t seed, const Signature& sig);

// Random well-shaped facts vector, for fuzzing evaluate().
ssa::StructuredFacts random_facts(uint64_t seed, int phase_count);

int expression_depth(const BoolExpr& e);

}  // namespace tpet::dsl
