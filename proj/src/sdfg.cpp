#include "pmiv/sdfg.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace pmiv {

namespace {

enum class Flow : unsigned char { Normal, Break, Continue, Terminal };

bool is_break(std::string_view kind) { return kind == "break" || kind == "Break"; }
bool is_continue(std::string_view kind) { return kind == "continue" || kind == "Continue"; }

Flow flow_of(std::string_view kind)
{
    if (is_terminator_kind(kind)) {
        return Flow::Terminal;
    }
    if (is_break(kind)) {
        return Flow::Break;
    }
    if (is_continue(kind)) {
        return Flow::Continue;
    }
    return Flow::Normal;
}

/// Dense integer view of a document: index i is the i-th node in id order.
class NodeIndex {
public:
    explicit NodeIndex(const AstDocument& ast) : ast_(ast)
    {
        nodes_.reserve(ast.nodes.size());
        for (const auto& [id, node] : ast.nodes) {
            index_.emplace(id, static_cast<int>(nodes_.size()));
            nodes_.push_back(&node);
        }
    }

    const AstDocument& ast() const { return ast_; }
    const AstNode& node(int i) const { return *nodes_[static_cast<std::size_t>(i)]; }
    int index(const std::string& id) const { return index_.at(id); }
    std::size_t size() const { return nodes_.size(); }

    std::vector<int> ids(int i, std::string_view key) const
    {
        std::vector<int> out;
        for (const auto& id : ast_.statement_ids(node(i), key)) {
            out.push_back(index(id));
        }
        return out;
    }
    int condition(int i) const { return ids(i, "condition").at(0); }
    bool has(int i, std::string_view key) const { return node(i).attribute(key) != nullptr; }

    /// Post-order evaluation sequence of an expression.
    const std::vector<int>& expression(int i)
    {
        auto it = expr_cache_.find(i);
        if (it != expr_cache_.end()) {
            return it->second;
        }
        std::vector<int> seq;
        for (const auto& id : ast_.operand_ids(node(i))) {
            const auto& sub = expression(index(id));
            seq.insert(seq.end(), sub.begin(), sub.end());
        }
        seq.push_back(i);
        return expr_cache_.emplace(i, std::move(seq)).first->second;
    }

private:
    const AstDocument& ast_;
    std::vector<const AstNode*> nodes_;
    std::unordered_map<std::string, int> index_;
    std::unordered_map<int, std::vector<int>> expr_cache_;
};

// ---------------------------------------------------------------------------
// Path enumeration

struct Piece {
    std::vector<int> seq;
    Flow flow = Flow::Normal;
};
using Pieces = std::vector<Piece>;

std::vector<int> cat(std::initializer_list<const std::vector<int>*> parts)
{
    std::size_t n = 0;
    for (const auto* p : parts) {
        n += p->size();
    }
    std::vector<int> out;
    out.reserve(n);
    for (const auto* p : parts) {
        out.insert(out.end(), p->begin(), p->end());
    }
    return out;
}

class PathWalker {
public:
    PathWalker(NodeIndex& index, std::size_t cap) : index_(index), cap_(cap) {}

    bool truncated() const { return truncated_; }

    Pieces sequence(const std::vector<int>& ids)
    {
        Pieces acc{Piece{}};
        for (int id : ids) {
            const bool open = std::any_of(acc.begin(), acc.end(), [](const Piece& p) { return p.flow == Flow::Normal; });
            if (!open) {
                break;
            }
            Pieces stmt = statement(id);
            Pieces next;
            for (auto& p : acc) {
                if (p.flow != Flow::Normal) {
                    push(next, std::move(p.seq), p.flow);
                    continue;
                }
                for (const auto& s : stmt) {
                    push(next, cat({&p.seq, &s.seq}), s.flow);
                }
            }
            acc = std::move(next);
        }
        return acc;
    }

    Pieces statement(int id)
    {
        const std::string& kind = index_.node(id).kind;
        Pieces out;
        if (kind == "Block") {
            return sequence(index_.ids(id, "statements"));
        }
        if (kind == "If") {
            const auto c = index_.expression(index_.condition(id));
            for (const auto& t : sequence(index_.ids(id, "then"))) {
                push(out, cat({&c, &t.seq}), t.flow);
            }
            if (index_.has(id, "else")) {
                for (const auto& e : sequence(index_.ids(id, "else"))) {
                    push(out, cat({&c, &e.seq}), e.flow);
                }
            } else {
                push(out, c, Flow::Normal);
            }
            return out;
        }
        if (kind == "While" || kind == "ForEach") {
            const auto c = index_.expression(index_.condition(id));
            push(out, c, Flow::Normal);
            for (const auto& b : sequence(index_.ids(id, "body"))) {
                loop_exit(out, b, cat({&c, &b.seq}), c);
            }
            return out;
        }
        if (kind == "For") {
            const auto c = index_.expression(index_.condition(id));
            const Pieces update = sequence(index_.ids(id, "update"));
            Pieces loop;
            push(loop, c, Flow::Normal);
            for (const auto& b : sequence(index_.ids(id, "body"))) {
                if (b.flow == Flow::Normal || b.flow == Flow::Continue) {
                    for (const auto& u : update) {
                        push(loop, cat({&c, &b.seq, &u.seq, &c}), Flow::Normal);
                    }
                } else {
                    loop_exit(loop, b, cat({&c, &b.seq}), c);
                }
            }
            Pieces init = sequence(index_.ids(id, "init"));
            for (auto& i : init) {
                if (i.flow != Flow::Normal) {
                    push(out, std::move(i.seq), i.flow);
                    continue;
                }
                for (const auto& l : loop) {
                    push(out, cat({&i.seq, &l.seq}), l.flow);
                }
            }
            return out;
        }
        if (kind == "DoWhile") {
            const auto c = index_.expression(index_.condition(id));
            const Pieces body = sequence(index_.ids(id, "body"));
            for (const auto& b1 : body) {
                if (b1.flow != Flow::Normal && b1.flow != Flow::Continue) {
                    push(out, b1.seq, b1.flow == Flow::Break ? Flow::Normal : b1.flow);
                    continue;
                }
                push(out, cat({&b1.seq, &c}), Flow::Normal);
                for (const auto& b2 : body) {
                    loop_exit(out, b2, cat({&b1.seq, &c, &b2.seq}), c);
                }
            }
            return out;
        }
        if (kind == "Switch") {
            const auto c = index_.expression(index_.condition(id));
            auto arm = [&](const Pieces& pieces) {
                for (const auto& k : pieces) {
                    push(out, cat({&c, &k.seq}), k.flow == Flow::Break ? Flow::Normal : k.flow);
                }
            };
            for (int case_id : index_.ids(id, "cases")) {
                arm(statement(case_id));
            }
            if (index_.has(id, "default")) {
                arm(sequence(index_.ids(id, "default")));
            } else {
                push(out, c, Flow::Normal);
            }
            return out;
        }
        push(out, index_.expression(id), flow_of(kind));
        return out;
    }

private:
    /// One pass through a loop body piece: back to the head and out, or leave early.
    void loop_exit(Pieces& out, const Piece& body, std::vector<int> prefix, const std::vector<int>& head)
    {
        switch (body.flow) {
        case Flow::Normal:
        case Flow::Continue:
            prefix.insert(prefix.end(), head.begin(), head.end());
            push(out, std::move(prefix), Flow::Normal);
            break;
        case Flow::Break:
            push(out, std::move(prefix), Flow::Normal);
            break;
        case Flow::Terminal:
            push(out, std::move(prefix), Flow::Terminal);
            break;
        }
    }

    void push(Pieces& out, std::vector<int> seq, Flow flow)
    {
        if (out.size() >= cap_) {
            truncated_ = true;
            return;
        }
        out.push_back(Piece{std::move(seq), flow});
    }

    NodeIndex& index_;
    std::size_t cap_;
    bool truncated_ = false;
};

// ---------------------------------------------------------------------------
// Path counting (saturating)

struct Counts {
    std::size_t normal = 0, brk = 0, cont = 0, term = 0;
    std::size_t total() const { return normal + brk + cont + term; }
};

class PathCounter {
public:
    PathCounter(NodeIndex& index, std::size_t cap) : index_(index), limit_(cap + 1) {}

    std::size_t add(std::size_t a, std::size_t b) const { return std::min(limit_, a + b); }
    std::size_t mul(std::size_t a, std::size_t b) const
    {
        if (a == 0 || b == 0) {
            return 0;
        }
        return a > limit_ / b ? limit_ : std::min(limit_, a * b);
    }

    Counts sequence(const std::vector<int>& ids)
    {
        Counts acc{1, 0, 0, 0};
        for (int id : ids) {
            if (acc.normal == 0) {
                break;
            }
            const Counts s = statement(id);
            acc = Counts{mul(acc.normal, s.normal), add(acc.brk, mul(acc.normal, s.brk)),
                         add(acc.cont, mul(acc.normal, s.cont)), add(acc.term, mul(acc.normal, s.term))};
        }
        return acc;
    }

    Counts statement(int id)
    {
        const std::string& kind = index_.node(id).kind;
        if (kind == "Block") {
            return sequence(index_.ids(id, "statements"));
        }
        if (kind == "If") {
            const Counts t = sequence(index_.ids(id, "then"));
            const Counts e = index_.has(id, "else") ? sequence(index_.ids(id, "else")) : Counts{1, 0, 0, 0};
            return {add(t.normal, e.normal), add(t.brk, e.brk), add(t.cont, e.cont), add(t.term, e.term)};
        }
        if (kind == "While" || kind == "ForEach") {
            const Counts b = sequence(index_.ids(id, "body"));
            return {add(1, add(add(b.normal, b.cont), b.brk)), 0, 0, b.term};
        }
        if (kind == "For") {
            const Counts b = sequence(index_.ids(id, "body"));
            const Counts u = sequence(index_.ids(id, "update"));
            const Counts loop{add(add(1, mul(add(b.normal, b.cont), u.total())), b.brk), 0, 0, b.term};
            const Counts i = sequence(index_.ids(id, "init"));
            return {mul(i.normal, loop.normal), i.brk, i.cont, add(i.term, mul(i.normal, loop.term))};
        }
        if (kind == "DoWhile") {
            const Counts b = sequence(index_.ids(id, "body"));
            const std::size_t again = add(b.normal, b.cont);
            const std::size_t normal = add(b.brk, mul(again, add(1, add(again, b.brk))));
            return {normal, 0, 0, add(b.term, mul(again, b.term))};
        }
        if (kind == "Switch") {
            Counts out{};
            auto arm = [&](const Counts& k) {
                out.normal = add(out.normal, add(k.normal, k.brk));
                out.cont = add(out.cont, k.cont);
                out.term = add(out.term, k.term);
            };
            for (int case_id : index_.ids(id, "cases")) {
                arm(statement(case_id));
            }
            arm(index_.has(id, "default") ? sequence(index_.ids(id, "default")) : Counts{1, 0, 0, 0});
            return out;
        }
        switch (flow_of(kind)) {
        case Flow::Normal:
            return {1, 0, 0, 0};
        case Flow::Break:
            return {0, 1, 0, 0};
        case Flow::Continue:
            return {0, 0, 1, 0};
        case Flow::Terminal:
            break;
        }
        return {0, 0, 0, 1};
    }

private:
    NodeIndex& index_;
    std::size_t limit_;
};

// ---------------------------------------------------------------------------
// Structural emission

struct Frag {
    std::vector<int> first;
    bool pass = true; // flow can cross without touching a vertex
    std::vector<int> exits;
    std::vector<int> breaks;
    std::vector<int> conts;
};

void append(std::vector<int>& to, const std::vector<int>& from) { to.insert(to.end(), from.begin(), from.end()); }

class StructuralEmitter {
public:
    explicit StructuralEmitter(NodeIndex& index) : index_(index), used_(index.size(), false) {}

    const std::vector<bool>& used() const { return used_; }
    std::vector<std::pair<int, int>>& edges() { return edges_; }

    Frag sequence(const std::vector<int>& ids)
    {
        Frag r;
        for (int id : ids) {
            if (!r.pass && r.exits.empty()) {
                break; // rest is unreachable
            }
            Frag f = statement(id);
            connect(r.exits, f.first);
            if (r.pass) {
                append(r.first, f.first);
            }
            if (f.pass) {
                append(f.exits, r.exits);
            }
            r.exits = std::move(f.exits);
            r.pass = r.pass && f.pass;
            append(r.breaks, f.breaks);
            append(r.conts, f.conts);
        }
        return r;
    }

    Frag statement(int id)
    {
        const std::string& kind = index_.node(id).kind;
        if (kind == "Block") {
            return sequence(index_.ids(id, "statements"));
        }
        if (kind == "If") {
            const auto [c0, cl] = chain(index_.expression(index_.condition(id)));
            Frag t = sequence(index_.ids(id, "then"));
            Frag e = index_.has(id, "else") ? sequence(index_.ids(id, "else")) : Frag{};
            connect({cl}, t.first);
            connect({cl}, e.first);
            Frag r{{c0}, false, {}, {}, {}};
            for (Frag* arm : {&t, &e}) {
                append(r.exits, arm->exits);
                if (arm->pass) {
                    r.exits.push_back(cl);
                }
                append(r.breaks, arm->breaks);
                append(r.conts, arm->conts);
            }
            return r;
        }
        if (kind == "While" || kind == "ForEach") {
            const auto [c0, cl] = chain(index_.expression(index_.condition(id)));
            Frag b = sequence(index_.ids(id, "body"));
            connect({cl}, b.first);
            connect(b.exits, {c0});
            connect(b.conts, {c0});
            if (b.pass) {
                edges_.emplace_back(cl, c0);
            }
            Frag r{{c0}, false, {cl}, {}, {}};
            append(r.exits, b.breaks);
            return r;
        }
        if (kind == "For") {
            Frag init = sequence(index_.ids(id, "init"));
            const auto [c0, cl] = chain(index_.expression(index_.condition(id)));
            connect(init.exits, {c0});
            Frag r{init.first, false, {cl}, init.breaks, init.conts};
            if (init.pass) {
                r.first.push_back(c0);
            }
            Frag b = sequence(index_.ids(id, "body"));
            connect({cl}, b.first);
            std::vector<int> done = b.exits;
            append(done, b.conts);
            if (!done.empty() || b.pass) {
                Frag u = sequence(index_.ids(id, "update"));
                connect(done, u.first);
                if (b.pass) {
                    connect({cl}, u.first);
                }
                if (u.pass) {
                    connect(done, {c0});
                    if (b.pass) {
                        edges_.emplace_back(cl, c0);
                    }
                }
                connect(u.exits, {c0});
            }
            append(r.exits, b.breaks);
            return r;
        }
        if (kind == "DoWhile") {
            Frag b = sequence(index_.ids(id, "body"));
            Frag r{b.first, false, {}, {}, {}};
            std::vector<int> done = b.exits;
            append(done, b.conts);
            if (!done.empty() || b.pass) {
                const auto [c0, cl] = chain(index_.expression(index_.condition(id)));
                if (b.pass) {
                    r.first.push_back(c0);
                    edges_.emplace_back(cl, c0);
                }
                connect(done, {c0});
                connect({cl}, b.first);
                r.exits.push_back(cl);
            }
            append(r.exits, b.breaks);
            return r;
        }
        if (kind == "Switch") {
            const auto [c0, cl] = chain(index_.expression(index_.condition(id)));
            Frag r{{c0}, false, {}, {}, {}};
            auto arm = [&](const Frag& k) {
                connect({cl}, k.first);
                if (k.pass) {
                    r.exits.push_back(cl);
                }
                append(r.exits, k.exits);
                append(r.exits, k.breaks);
                append(r.conts, k.conts);
            };
            for (int case_id : index_.ids(id, "cases")) {
                arm(statement(case_id));
            }
            if (index_.has(id, "default")) {
                arm(sequence(index_.ids(id, "default")));
            } else {
                r.exits.push_back(cl);
            }
            return r;
        }
        const auto [first, last] = chain(index_.expression(id));
        Frag r{{first}, false, {}, {}, {}};
        switch (flow_of(kind)) {
        case Flow::Normal:
            r.exits.push_back(last);
            break;
        case Flow::Break:
            r.breaks.push_back(last);
            break;
        case Flow::Continue:
            r.conts.push_back(last);
            break;
        case Flow::Terminal:
            break;
        }
        return r;
    }

private:
    std::pair<int, int> chain(const std::vector<int>& seq)
    {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            used_[static_cast<std::size_t>(seq[i])] = true;
            if (i > 0) {
                edges_.emplace_back(seq[i - 1], seq[i]);
            }
        }
        return {seq.front(), seq.back()};
    }

    void connect(const std::vector<int>& from, const std::vector<int>& to)
    {
        for (int a : from) {
            for (int b : to) {
                edges_.emplace_back(a, b);
            }
        }
    }

    NodeIndex& index_;
    std::vector<bool> used_;
    std::vector<std::pair<int, int>> edges_;
};

std::vector<int> entry_indices(const NodeIndex& index)
{
    std::vector<int> out;
    for (const auto& id : index.ast().entry_ids) {
        out.push_back(index.index(id));
    }
    return out;
}

Sdfg assemble(const NodeIndex& index, const std::vector<bool>& used, const std::vector<std::pair<int, int>>& raw)
{
    Sdfg g;
    g.function_name = index.ast().function_name;
    std::vector<std::uint32_t> remap(index.size(), std::numeric_limits<std::uint32_t>::max());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (used[i]) {
            remap[i] = static_cast<std::uint32_t>(g.nodes.size());
            g.nodes.push_back(index.node(static_cast<int>(i)));
        }
    }
    g.edges.reserve(raw.size());
    for (const auto& [a, b] : raw) {
        g.edges.push_back(Edge{remap[static_cast<std::size_t>(a)], remap[static_cast<std::size_t>(b)]});
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

} // namespace

std::size_t Sdfg::index_of(std::string_view id) const
{
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const AstNode& n, std::string_view key) { return n.id < key; });
    if (it == nodes.end() || it->id != id) {
        return static_cast<std::size_t>(-1);
    }
    return static_cast<std::size_t>(it - nodes.begin());
}

PathEnumeration enumerate_paths(const AstDocument& ast, std::size_t max_paths)
{
    PathEnumeration out;
    if (ast.empty()) {
        return out;
    }
    NodeIndex index(ast);
    PathWalker walker(index, std::max<std::size_t>(max_paths, 1));
    for (const auto& piece : walker.sequence(entry_indices(index))) {
        if (piece.seq.empty()) {
            continue;
        }
        std::vector<std::string> path;
        path.reserve(piece.seq.size());
        for (int i : piece.seq) {
            path.push_back(index.node(i).id);
        }
        out.paths.push_back(std::move(path));
    }
    out.truncated = walker.truncated();
    return out;
}

std::size_t count_paths(const AstDocument& ast, std::size_t cap)
{
    if (ast.empty()) {
        return 0;
    }
    NodeIndex index(ast);
    PathCounter counter(index, cap);
    const std::size_t total = std::min(cap + 1, counter.sequence(entry_indices(index)).total());
    // A body without expressions has one empty path, which enumeration drops.
    return total == 1 ? enumerate_paths(ast, 1).paths.size() : total;
}

Sdfg merge_paths(const AstDocument& ast, const std::vector<std::vector<std::string>>& paths)
{
    NodeIndex index(ast);
    std::vector<bool> used(index.size(), false);
    std::vector<std::pair<int, int>> raw;
    for (const auto& path : paths) {
        for (std::size_t i = 0; i < path.size(); ++i) {
            const int v = index.index(path[i]);
            used[static_cast<std::size_t>(v)] = true;
            if (i > 0) {
                raw.emplace_back(index.index(path[i - 1]), v);
            }
        }
    }
    return assemble(index, used, raw);
}

Sdfg build_sdfg_structural(const AstDocument& ast)
{
    NodeIndex index(ast);
    StructuralEmitter emitter(index);
    if (!ast.empty()) {
        emitter.sequence(entry_indices(index));
    }
    return assemble(index, emitter.used(), emitter.edges());
}

SdfgBuild build_sdfg_checked(const AstDocument& ast, std::size_t max_paths)
{
    if (ast.empty()) {
        Sdfg g;
        g.function_name = ast.function_name;
        return {std::move(g), false};
    }
    if (count_paths(ast, max_paths) > max_paths) {
        return {build_sdfg_structural(ast), true};
    }
    PathEnumeration paths = enumerate_paths(ast, max_paths);
    if (paths.truncated) {
        return {build_sdfg_structural(ast), true};
    }
    return {merge_paths(ast, paths.paths), false};
}

Sdfg build_sdfg(const AstDocument& ast, std::size_t max_paths) { return build_sdfg_checked(ast, max_paths).graph; }

std::string to_dot(const Sdfg& g)
{
    std::ostringstream os;
    os << "digraph \"" << g.function_name << "\" {\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        os << "  n" << i << " [label=\"" << g.nodes[i].id << ':' << g.nodes[i].kind << "\"];\n";
    }
    for (const auto& e : g.edges) {
        os << "  n" << e.source << " -> n" << e.target << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace pmiv
