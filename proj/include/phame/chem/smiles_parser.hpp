#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phame/chem/molecule.hpp"
#include "phame/core/error.hpp"

namespace phame::chem {

namespace detail {

struct OpenRing {
  int atom;
  std::optional<BondOrder> order;
  std::size_t offset;
};

struct PendingBond {
  BondOrder order;
  std::size_t offset;
};

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  Molecule run() {
    if (text_.empty()) throw ParseError(ErrorCode::InvalidSyntax, 0, "empty SMILES");
    for (unsigned char c : text_) {
      if (c >= 0x80) throw ParseError(ErrorCode::InvalidSyntax, 0, "non-ASCII SMILES");
    }
    while (pos_ < text_.size()) step();
    if (pending_) throw ParseError(ErrorCode::InvalidSyntax, pending_->offset, "dangling bond");
    if (dot_) throw ParseError(ErrorCode::InvalidSyntax, *dot_, "trailing fragment separator");
    if (!branches_.empty()) {
      throw ParseError(ErrorCode::UnclosedBranch, branches_.back().second, "unclosed branch");
    }
    if (!rings_.empty()) {
      std::size_t first = text_.size();
      for (const auto& [label, ring] : rings_) first = std::min(first, ring.offset);
      throw ParseError(ErrorCode::UnmatchedRingBond, first, "unmatched ring bond");
    }
    return std::move(mol_);
  }

 private:
  void step() {
    const char c = text_[pos_];
    switch (c) {
      case '-': return bond_symbol(BondOrder::Single);
      case '=': return bond_symbol(BondOrder::Double);
      case '#': return bond_symbol(BondOrder::Triple);
      case ':': return bond_symbol(BondOrder::Aromatic);
      case '/':
      case '\\':
        mol_.set_stereo_ignored(true);
        return bond_symbol(BondOrder::Single);
      case '(': {
        if (prev_ < 0 || pending_) throw ParseError(ErrorCode::InvalidSyntax, pos_, "branch without an atom");
        branches_.emplace_back(prev_, pos_);
        last_open_ = pos_;
        ++pos_;
        return;
      }
      case ')': {
        if (branches_.empty()) throw ParseError(ErrorCode::UnclosedBranch, pos_, "unopened branch");
        if (pending_) throw ParseError(ErrorCode::InvalidSyntax, pending_->offset, "dangling bond");
        if (last_open_ + 1 == pos_) {
          throw ParseError(ErrorCode::InvalidSyntax, pos_, "empty branch");
        }
        prev_ = branches_.back().first;
        branches_.pop_back();
        ++pos_;
        return;
      }
      case '.': {
        if (prev_ < 0 || pending_ || !branches_.empty()) {
          throw ParseError(ErrorCode::InvalidSyntax, pos_, "misplaced fragment separator");
        }
        prev_ = -1;
        dot_ = pos_;
        ++pos_;
        return;
      }
      case '%': {
        if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
          throw ParseError(ErrorCode::InvalidSyntax, pos_, "malformed %nn ring label");
        }
        const int label = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        ring_closure(label, pos_);
        pos_ += 3;
        return;
      }
      case '[': return bracket_atom();
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure(c - '0', pos_);
      ++pos_;
      return;
    }
    organic_atom();
  }

  void bond_symbol(BondOrder order) {
    if (prev_ < 0 || pending_) throw ParseError(ErrorCode::InvalidSyntax, pos_, "misplaced bond symbol");
    pending_ = PendingBond{order, pos_};
    ++pos_;
  }

  void organic_atom() {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    std::optional<Element> elem;
    bool aromatic = false;
    std::size_t len = 1;
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      elem = Element::Cl;
      len = 2;
    } else if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      elem = Element::Br;
      len = 2;
    } else {
      switch (c) {
        case 'B': elem = Element::B; break;
        case 'C': elem = Element::C; break;
        case 'N': elem = Element::N; break;
        case 'O': elem = Element::O; break;
        case 'P': elem = Element::P; break;
        case 'S': elem = Element::S; break;
        case 'F': elem = Element::F; break;
        case 'I': elem = Element::I; break;
        case 'b': elem = Element::B; aromatic = true; break;
        case 'c': elem = Element::C; aromatic = true; break;
        case 'n': elem = Element::N; aromatic = true; break;
        case 'o': elem = Element::O; aromatic = true; break;
        case 'p': elem = Element::P; aromatic = true; break;
        case 's': elem = Element::S; aromatic = true; break;
        default: break;
      }
    }
    if (!elem) {
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '*') {
        throw ParseError(ErrorCode::UnknownAtomSymbol, start, std::string("unknown atom symbol '") + c + "'");
      }
      throw ParseError(ErrorCode::InvalidSyntax, start, std::string("unexpected character '") + c + "'");
    }
    pos_ += len;
    attach(Atom{*elem, aromatic, 0, std::nullopt});
  }

  void bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      throw ParseError(ErrorCode::UnknownAtomSymbol, pos_, "isotope labels are not supported");
    }
    const std::size_t sym_start = pos_;
    if (pos_ >= text_.size()) throw ParseError(ErrorCode::InvalidSyntax, open, "unclosed bracket atom");
    Atom atom;
    const char c = text_[pos_];
    if (std::islower(static_cast<unsigned char>(c))) {
      // aromatic: one letter only in the supported set
      const auto e = element_from_symbol(std::string(1, static_cast<char>(std::toupper(c))));
      if (!e || !can_be_aromatic(*e)) {
        throw ParseError(ErrorCode::UnknownAtomSymbol, sym_start, "unknown aromatic symbol");
      }
      atom.element = *e;
      atom.aromatic = true;
      ++pos_;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::optional<Element> e;
      if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        e = element_from_symbol(text_.substr(pos_, 2));
        if (e) pos_ += 2;
      }
      if (!e) {
        e = element_from_symbol(text_.substr(pos_, 1));
        if (!e) throw ParseError(ErrorCode::UnknownAtomSymbol, sym_start, "unknown bracket atom symbol");
        ++pos_;
        // A trailing lowercase letter that is not an H count means an unsupported two-letter symbol.
        if (pos_ < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_]))) {
          throw ParseError(ErrorCode::UnknownAtomSymbol, sym_start, "unknown bracket atom symbol");
        }
      }
      atom.element = *e;
    } else {
      throw ParseError(ErrorCode::UnknownAtomSymbol, sym_start, "missing bracket atom symbol");
    }
    // chirality marks are read and dropped
    while (pos_ < text_.size() && text_[pos_] == '@') {
      mol_.set_stereo_ignored(true);
      ++pos_;
    }
    int h = 0;
    if (pos_ < text_.size() && text_[pos_] == 'H') {
      ++pos_;
      h = 1;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        h = text_[pos_] - '0';
        ++pos_;
      }
    }
    atom.explicit_h = h;
    if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
      atom.formal_charge = charge();
    }
    if (pos_ >= text_.size()) throw ParseError(ErrorCode::InvalidSyntax, open, "unclosed bracket atom");
    if (text_[pos_] != ']') {
      const char bad = text_[pos_];
      if (bad == '+' || bad == '-' || std::isdigit(static_cast<unsigned char>(bad))) {
        throw ParseError(ErrorCode::InvalidCharge, pos_, "malformed charge");
      }
      throw ParseError(ErrorCode::InvalidSyntax, pos_, "unexpected character in bracket atom");
    }
    ++pos_;
    attach(atom);
  }

  int charge() {
    const char sign = text_[pos_];
    const int unit = sign == '+' ? 1 : -1;
    const std::size_t start = pos_;
    ++pos_;
    int magnitude = 1;
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      magnitude = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        magnitude = magnitude * 10 + (text_[pos_] - '0');
        ++pos_;
        if (magnitude > 8) throw ParseError(ErrorCode::InvalidCharge, start, "charge magnitude too large");
      }
    } else {
      while (pos_ < text_.size() && text_[pos_] == sign) {
        ++magnitude;
        ++pos_;
      }
      if (magnitude > 8) throw ParseError(ErrorCode::InvalidCharge, start, "charge magnitude too large");
    }
    return unit * magnitude;
  }

  void attach(const Atom& atom) {
    const int idx = mol_.add_atom(atom);
    if (prev_ >= 0) {
      BondOrder order = default_order(prev_, idx);
      if (pending_) order = pending_->order;
      mol_.add_bond(prev_, idx, order);
    } else if (pending_) {
      throw ParseError(ErrorCode::InvalidSyntax, pending_->offset, "bond without a preceding atom");
    }
    pending_.reset();
    dot_.reset();
    prev_ = idx;
    last_open_ = std::string_view::npos;
  }

  BondOrder default_order(int a, int b) const {
    return mol_.atom(a).aromatic && mol_.atom(b).aromatic ? BondOrder::Aromatic : BondOrder::Single;
  }

  void ring_closure(int label, std::size_t offset) {
    if (prev_ < 0) throw ParseError(ErrorCode::InvalidSyntax, offset, "ring bond without an atom");
    auto it = rings_.find(label);
    if (it == rings_.end()) {
      rings_[label] = OpenRing{prev_, pending_ ? std::optional(pending_->order) : std::nullopt, offset};
      pending_.reset();
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    std::optional<BondOrder> order = open.order;
    if (pending_) {
      if (order && *order != pending_->order) {
        throw ParseError(ErrorCode::InvalidSyntax, pending_->offset, "conflicting ring bond orders");
      }
      order = pending_->order;
    }
    if (open.atom == prev_) throw ParseError(ErrorCode::InvalidSyntax, offset, "ring bond to itself");
    if (mol_.bond_between(open.atom, prev_)) {
      throw ParseError(ErrorCode::InvalidSyntax, offset, "duplicate bond via ring closure");
    }
    mol_.add_bond(open.atom, prev_, order.value_or(default_order(open.atom, prev_)));
    pending_.reset();
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Molecule mol_;
  int prev_ = -1;
  std::optional<PendingBond> pending_;
  std::vector<std::pair<int, std::size_t>> branches_;
  std::map<int, OpenRing> rings_;
  std::size_t last_open_ = std::string_view::npos;
  std::optional<std::size_t> dot_;
};

}  // namespace detail

/// Parses the supported SMILES subset. Throws ParseError carrying the byte
/// offset of the first fault.
inline Molecule parse_smiles(std::string_view text) { return detail::SmilesParser(text).run(); }

}  // namespace phame::chem
