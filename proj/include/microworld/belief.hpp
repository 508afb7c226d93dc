#pragma once

// Reader-side knowledge: what the statements read so far entail about the
// world, with the statement indices each conclusion rests on.
//
// Locations of agents and uncarried objects are tracked as shared location
// variables ("classes"). Entities in one class are known to be co-located
// even when the location itself is uncertain (an object dropped by an agent
// whose position is unknown). Each class keeps the set of locations it may
// still occupy. The carrier of every object is always known exactly: stories
// start with nothing carried, and every change of carrier is narrated.
//
// Under these rules the set of worlds consistent with a story is the product
// of the class domains, so labels computed here agree with brute-force
// enumeration.

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "microworld/world.hpp"

namespace mw {

class LocationSet {
 public:
  LocationSet() = default;
  static LocationSet all(int location_count);
  static LocationSet single(LocationId l) { return LocationSet(std::uint64_t{1} << l.value); }

  bool contains(LocationId l) const { return (bits_ >> l.value) & 1U; }
  int size() const { return std::popcount(bits_); }
  bool empty() const { return bits_ == 0; }
  std::optional<LocationId> only() const;
  std::vector<LocationId> members() const;

  LocationSet without(LocationId l) const {
    return LocationSet(bits_ & ~(std::uint64_t{1} << l.value));
  }
  LocationSet operator&(LocationSet other) const { return LocationSet(bits_ & other.bits_); }
  bool operator==(const LocationSet&) const = default;

 private:
  explicit LocationSet(std::uint64_t bits) : bits_(bits) {}
  std::uint64_t bits_ = 0;
};

class BeliefState {
 public:
  BeliefState() = default;
  // Nothing read yet: every agent and object may be at any location, and no
  // object is carried.
  explicit BeliefState(const Declaration& decl);

  // Applies one statement in place. On Contradiction the state is unchanged.
  void apply(const Declaration& decl, const Statement& stmt);

  LocationSet possible_locations(AgentId a) const;
  LocationSet possible_locations(ObjectId o) const;
  std::optional<AgentId> carrier(ObjectId o) const;

  // Statement indices (sorted) that the current knowledge about the entity
  // rests on.
  std::vector<int> provenance(AgentId a) const;
  std::vector<int> provenance(ObjectId o) const;
  const std::vector<int>& carry_provenance(ObjectId o) const {
    return carry_prov_.at(o.value);
  }

  Label label(const Proposition& prop) const;
  std::vector<int> label_provenance(const Proposition& prop) const;

  // Identifier of the shared location variable behind an entity; equal ids
  // mean "known to be co-located".
  int location_class(AgentId a) const { return agent_class_.at(a.value); }
  int location_class(ObjectId o) const;

  int statements_read() const { return read_; }

 private:
  struct LocationClass {
    LocationSet domain;
    std::vector<int> prov;
  };

  int new_class(LocationSet domain, std::vector<int> prov);
  void merge_into(int keep, int drop, LocationSet domain, std::vector<int> prov);
  const LocationClass& cls(int id) const { return classes_[id]; }

  std::vector<LocationClass> classes_;
  std::vector<int> agent_class_;
  std::vector<int> object_class_;  // meaningful only while uncarried
  std::vector<int> carrier_;       // -1 while uncarried
  std::vector<std::vector<int>> carry_prov_;
  int location_count_ = 0;
  int read_ = 0;
};

// Pure form of BeliefState::apply. Throws Contradiction.
BeliefState update_belief(const Declaration& decl, const BeliefState& belief,
                          const Statement& stmt);

Label label(const BeliefState& belief, const Proposition& prop);

// Sorted union of two sorted index lists.
std::vector<int> merge_indices(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace mw
