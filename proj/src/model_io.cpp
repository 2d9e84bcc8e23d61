#include "missarf/model_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace missarf {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Infinities are not representable in JSON; encode them as strings.
json encode_double(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    return json(v);
}

double decode_double(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        throw ParseError("model file: bad numeric literal '" + s + "'");
    }
    return j.get<double>();
}

json schema_to_json(const std::vector<ColumnSchema>& schema) {
    json arr = json::array();
    for (const auto& col : schema) {
        json c;
        c["name"] = col.name;
        c["kind"] = col.kind == ColumnKind::numeric ? "numeric" : "categorical";
        c["categories"] = col.categories;
        arr.push_back(std::move(c));
    }
    return arr;
}

std::vector<ColumnSchema> schema_from_json(const json& arr) {
    std::vector<ColumnSchema> schema;
    for (const auto& c : arr) {
        ColumnSchema col;
        col.name = c.at("name").get<std::string>();
        const auto kind = c.at("kind").get<std::string>();
        if (kind == "numeric") col.kind = ColumnKind::numeric;
        else if (kind == "categorical") col.kind = ColumnKind::categorical;
        else throw ParseError("model file: unknown column kind '" + kind + "'");
        col.categories = c.at("categories").get<std::vector<std::string>>();
        schema.push_back(std::move(col));
    }
    return schema;
}

json tree_to_json(const Tree& tree) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
        json n;
        if (node.is_leaf()) {
            n["leaf_id"] = node.leaf_id;
        } else {
            n["left"] = node.left;
            n["right"] = node.right;
            n["feature"] = node.rule.feature;
            n["missing_left"] = node.rule.missing_left;
            if (node.rule.is_numeric) {
                n["threshold"] = node.rule.threshold;
            } else {
                n["left_labels"] = node.rule.left_labels;
                n["seen_labels"] = node.rule.seen_labels;
            }
        }
        nodes.push_back(std::move(n));
    }
    return nodes;
}

Tree tree_from_json(const json& nodes) {
    Tree tree;
    for (const auto& n : nodes) {
        TreeNode node;
        if (n.contains("leaf_id")) {
            node.leaf_id = n.at("leaf_id").get<std::int32_t>();
        } else {
            node.left = n.at("left").get<std::int32_t>();
            node.right = n.at("right").get<std::int32_t>();
            node.rule.feature = n.at("feature").get<std::uint32_t>();
            node.rule.missing_left = n.at("missing_left").get<bool>();
            if (n.contains("threshold")) {
                node.rule.is_numeric = true;
                node.rule.threshold = n.at("threshold").get<double>();
            } else {
                node.rule.is_numeric = false;
                node.rule.left_labels = n.at("left_labels").get<std::uint64_t>();
                node.rule.seen_labels = n.at("seen_labels").get<std::uint64_t>();
            }
        }
        tree.nodes.push_back(std::move(node));
    }
    return tree;
}

}  // namespace

std::string serialize_model(const ArfModel& model) {
    json doc;
    doc["format"] = "missarf-model";
    doc["format_version"] = kModelFormatVersion;
    doc["schema"] = schema_to_json(model.density.schema());

    const auto& hp = model.forest.hyperparams();
    doc["hyperparams"] = {{"trees", hp.n_trees},
                          {"min_node_size", hp.min_node_size},
                          {"mtry", hp.mtry}};
    doc["n_real_rows"] = model.forest.n_real_rows();

    doc["fit_report"] = {{"iterations", model.report.iterations},
                         {"oob_trace", model.report.oob_trace},
                         {"converged", model.report.converged},
                         {"delta", model.report.delta}};

    json trees = json::array();
    for (std::size_t t = 0; t < model.forest.n_trees(); ++t)
        trees.push_back(tree_to_json(model.forest.tree(t)));
    doc["trees"] = std::move(trees);

    json leaves = json::array();
    const auto& schema = model.density.schema();
    for (std::size_t l = 0; l < model.density.n_leaves(); ++l) {
        const auto& geo = model.density.leaf(l);
        const auto& dens = model.density.density(l);
        json leaf;
        leaf["leaf_id"] = geo.leaf_id;
        leaf["tree"] = geo.tree;
        leaf["node"] = geo.node;
        leaf["weight"] = geo.weight;
        json bounds = json::array();
        json allowed = json::array();
        json numeric = json::array();
        json categorical = json::array();
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (schema[j].kind == ColumnKind::numeric) {
                bounds.push_back(json::array({encode_double(geo.num_bounds[j].lo),
                                              encode_double(geo.num_bounds[j].hi)}));
                const auto& tn = dens.numeric[model.density.numeric_ordinal(j)];
                numeric.push_back({{"mu", tn.mu}, {"sigma", tn.sigma}});
            } else {
                allowed.push_back(geo.allowed[j]);
                categorical.push_back(dens.categorical[model.density.categorical_ordinal(j)]);
            }
        }
        leaf["bounds"] = std::move(bounds);
        leaf["allowed"] = std::move(allowed);
        leaf["numeric"] = std::move(numeric);
        leaf["categorical"] = std::move(categorical);
        leaves.push_back(std::move(leaf));
    }
    doc["leaves"] = std::move(leaves);

    json columns = json::array();
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& s = model.density.column_summary(j);
        columns.push_back({{"observed", s.observed},
                           {"min", encode_double(s.min)},
                           {"max", encode_double(s.max)},
                           {"mean", s.mean},
                           {"freq", s.freq},
                           {"mode", s.mode}});
    }
    doc["columns"] = std::move(columns);

    return doc.dump();
}

ArfModel deserialize_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    if (!doc.contains("format") || doc["format"] != "missarf-model")
        throw ParseError("model file: unrecognized format");
    if (doc.at("format_version").get<int>() != kModelFormatVersion)
        throw ParseError("model file: unsupported format version");

    auto schema = schema_from_json(doc.at("schema"));

    ForestHyperparams hp;
    hp.n_trees = doc.at("hyperparams").at("trees").get<std::uint32_t>();
    hp.min_node_size = doc.at("hyperparams").at("min_node_size").get<std::uint32_t>();
    hp.mtry = doc.at("hyperparams").at("mtry").get<std::uint32_t>();

    std::vector<Tree> trees;
    for (const auto& t : doc.at("trees")) trees.push_back(tree_from_json(t));

    ArfModel model;
    model.forest = Forest(schema, hp, doc.at("n_real_rows").get<std::uint32_t>(),
                          std::move(trees), {});

    model.report.iterations = doc.at("fit_report").at("iterations").get<std::size_t>();
    model.report.oob_trace = doc.at("fit_report").at("oob_trace").get<std::vector<double>>();
    model.report.converged = doc.at("fit_report").at("converged").get<bool>();
    model.report.delta = doc.at("fit_report").at("delta").get<double>();

    const std::size_t p = schema.size();
    std::vector<LeafGeometry> leaves;
    std::vector<LeafDensity> densities;
    for (const auto& leaf : doc.at("leaves")) {
        LeafGeometry geo;
        geo.leaf_id = leaf.at("leaf_id").get<std::int32_t>();
        geo.tree = leaf.at("tree").get<std::uint32_t>();
        geo.node = leaf.at("node").get<std::int32_t>();
        geo.weight = leaf.at("weight").get<double>();
        geo.num_bounds.resize(p);
        geo.allowed.resize(p, 0);
        LeafDensity dens;
        std::size_t num_ord = 0, cat_ord = 0;
        for (std::size_t j = 0; j < p; ++j) {
            if (schema[j].kind == ColumnKind::numeric) {
                const auto& b = leaf.at("bounds").at(num_ord);
                geo.num_bounds[j].lo = decode_double(b.at(0));
                geo.num_bounds[j].hi = decode_double(b.at(1));
                const auto& tn = leaf.at("numeric").at(num_ord);
                dens.numeric.push_back(make_truncated_normal(tn.at("mu").get<double>(),
                                                             tn.at("sigma").get<double>(),
                                                             geo.num_bounds[j].lo,
                                                             geo.num_bounds[j].hi));
                ++num_ord;
            } else {
                geo.allowed[j] = leaf.at("allowed").at(cat_ord).get<std::uint64_t>();
                dens.categorical.push_back(
                    leaf.at("categorical").at(cat_ord).get<std::vector<double>>());
                ++cat_ord;
            }
        }
        leaves.push_back(std::move(geo));
        densities.push_back(std::move(dens));
    }

    std::vector<ColumnSummary> columns;
    for (const auto& c : doc.at("columns")) {
        ColumnSummary s;
        s.observed = c.at("observed").get<std::size_t>();
        s.min = decode_double(c.at("min"));
        s.max = decode_double(c.at("max"));
        s.mean = c.at("mean").get<double>();
        s.freq = c.at("freq").get<std::vector<double>>();
        s.mode = c.at("mode").get<std::int32_t>();
        columns.push_back(std::move(s));
    }

    model.density = DensityModel(std::move(schema), model.forest.n_trees(), std::move(leaves),
                                 std::move(densities), std::move(columns));
    return model;
}

void save_model(const ArfModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << serialize_model(model);
    if (!out) throw DataError("write failed for '" + path + "'");
}

ArfModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(text);
}

namespace {

struct Fnv1a {
    std::uint64_t state = 0xCBF29CE484222325ULL;
    void bytes(const void* data, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state ^= b[i];
            state *= 0x100000001B3ULL;
        }
    }
    void number(double v) { bytes(&v, sizeof(v)); }
    void integer(std::uint64_t v) { bytes(&v, sizeof(v)); }
    void text(const std::string& s) {
        integer(s.size());
        bytes(s.data(), s.size());
    }
};

}  // namespace

std::string model_fingerprint(const DensityModel& model) {
    Fnv1a h;
    h.integer(static_cast<std::uint64_t>(kModelFormatVersion));
    h.integer(model.n_trees());
    for (const auto& col : model.schema()) {
        h.text(col.name);
        h.integer(col.kind == ColumnKind::numeric ? 0 : 1);
        for (const auto& label : col.categories) h.text(label);
    }
    for (std::size_t l = 0; l < model.n_leaves(); ++l) {
        const auto& geo = model.leaf(l);
        const auto& dens = model.density(l);
        h.integer(static_cast<std::uint64_t>(geo.leaf_id));
        h.integer(geo.tree);
        h.number(geo.weight);
        for (std::size_t j = 0; j < model.schema().size(); ++j) {
            if (model.schema()[j].kind == ColumnKind::numeric) {
                h.number(geo.num_bounds[j].lo);
                h.number(geo.num_bounds[j].hi);
                const auto& tn = dens.numeric[model.numeric_ordinal(j)];
                h.number(tn.mu);
                h.number(tn.sigma);
            } else {
                h.integer(geo.allowed[j]);
                for (double pr : dens.categorical[model.categorical_ordinal(j)]) h.number(pr);
            }
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.state));
    return std::string(buf);
}

}  // namespace missarf
