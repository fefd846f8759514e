#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ffgt/errors.hpp"
#include "ffgt/graph.hpp"
#include "test_util.hpp"

using namespace ffgt;

TEST_CASE("make_graph validates its input") {
  CHECK_THROWS_AS(make_graph(3, {{0, 3}}, {0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(3, {{1, 1}}, {0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(3, {{0, 1}, {1, 0}}, {0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(3, {}, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(2, {{0, 1}}, {0, 0}, {}, {0, 0}), std::invalid_argument);
}

TEST_CASE("adjacency is sorted and symmetric") {
  const Graph g = make_graph(4, {{2, 0}, {3, 1}, {0, 1}}, {0, 1, 2, 0});
  CHECK(g.adjacency[0] == std::vector<int>{1, 2});
  CHECK(g.adjacency[1] == std::vector<int>{0, 3});
  CHECK(g.has_edge(0, 2));
  CHECK(g.has_edge(2, 0));
  CHECK_FALSE(g.has_edge(2, 3));
  // Normalized edge list: u < v, sorted.
  CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}});
}

TEST_CASE("graph line format round-trips bit-exactly") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g = test::random_graph(rng, 2 + static_cast<int>(rng.uniform_int(0, 18)), 0.3);
    if (rng.bernoulli(0.5)) {
      g.node_labels.assign(g.num_nodes, 0);
      for (auto& y : g.node_labels) y = static_cast<int>(rng.uniform_int(0, 1));
    }
    if (rng.bernoulli(0.5) && g.num_edges() > 0) {
      g.edge_type_ids.assign(g.num_edges(), 0);
      for (auto& t : g.edge_type_ids) t = static_cast<int>(rng.uniform_int(0, 2));
    }
    const std::string line = write_graph_line(g);
    const Graph back = parse_graph_line(line);
    CHECK(write_graph_line(back) == line);
    CHECK(back.num_nodes == g.num_nodes);
    CHECK(back.edges == g.edges);
    CHECK(back.node_feature_ids == g.node_feature_ids);
    CHECK(back.node_labels == g.node_labels);
    CHECK(back.edge_type_ids == g.edge_type_ids);
  }
}

TEST_CASE("parser accepts arbitrary key order") {
  const Graph g = parse_graph_line(
      R"({"node_feats":[1,0],"edges":[[0,1]],"num_nodes":2})");
  CHECK(g.num_nodes == 2);
  CHECK(g.has_edge(0, 1));
  CHECK_THROWS_AS(parse_graph_line("{not json"), IoError);
}

TEST_CASE("graph files round-trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ffgt_graph_io_test";
  fs::create_directories(dir);
  const auto path = (dir / "graphs.jsonl").string();

  Rng rng(3);
  std::vector<Graph> graphs;
  for (int i = 0; i < 20; ++i) graphs.push_back(test::random_graph(rng, 10, 0.25));
  write_graph_file(path, graphs);
  const auto back = read_graph_file(path);
  REQUIRE(back.size() == graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i)
    CHECK(write_graph_line(back[i]) == write_graph_line(graphs[i]));

  // Second write is byte-identical.
  std::ifstream f1(path, std::ios::binary);
  std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
  write_graph_file(path, back);
  std::ifstream f2(path, std::ios::binary);
  std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(bytes1 == bytes2);
  fs::remove_all(dir);

  CHECK_THROWS_AS(read_graph_file((dir / "missing.jsonl").string()), IoError);
}

TEST_CASE("edge_type lookup follows the sorted edge list") {
  const Graph g = make_graph(3, {{1, 2}, {0, 1}}, {0, 0, 0}, {}, {7, 3});
  CHECK(g.edge_type(0, 1) == 3);
  CHECK(g.edge_type(1, 0) == 3);
  CHECK(g.edge_type(1, 2) == 7);
  const Graph untyped = make_graph(2, {{0, 1}}, {0, 0});
  CHECK(untyped.edge_type(0, 1) == 0);
}
