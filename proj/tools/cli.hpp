#pragma once

// Command-line driver. Exit codes: 0 success, 1 usage / input / I/O error,
// 2 numerical failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cvxnmf/cvxnmf.hpp"

namespace cvxnmf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

struct SolverFlags {
    double tol = 1e-6;
    int max_iter = 2000;

    SolverOptions options() const {
        SolverOptions o;
        o.tol = tol;
        o.max_iter = max_iter;
        o.validate();
        return o;
    }
};

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    return cvxnmf::detail::format_real(v);
}

inline void add_solver_flags(CLI::App* sub, SolverFlags& f) {
    sub->add_option("--tol", f.tol, "stopping tolerance (gap or gradient mapping)")->capture_default_str();
    sub->add_option("--max-iter", f.max_iter, "iteration cap")->capture_default_str();
}

inline std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &pos);
        } catch (const std::exception&) {
            throw InvalidInput("--sizes: bad entry '" + tok + "'");
        }
        if (pos != tok.size() || v <= 0) throw InvalidInput("--sizes: bad entry '" + tok + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw InvalidInput("--sizes: empty list");
    return out;
}

} // namespace detail

/// Runs one command. `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"Convex NMF surrogates: solvers, certificates and partition benchmarks", "cvxnmf"};
    app.require_subcommand(1);
    app.fallthrough(false);

    // Shared across subcommands; only the invoked one is populated.
    std::string input, point, out_factor, out_point, out_p = "P.mtx", out_q = "Q.mtx";
    std::string out_summary = "run.json", out_graph = "graph.mtx", out_labels, grid, results = "results.csv";
    std::string loss_name = "kl", method = "nmf", sizes = "30,30";
    double gamma = 0.0, nu = 0.0, alpha = 0.1, beta = 0.9;
    std::uint64_t seed = 0;
    int rounds = 1, taylor_degree = 12;
    std::size_t k = 2, n = 60, trials = 10;
    bool ignore_diagonal = false;
    SolverFlags solver;

    auto summary_flag = [&](CLI::App* s) {
        s->add_option("--out-summary", out_summary, "run summary JSON")->capture_default_str();
    };

    auto* fsym = app.add_subcommand("factorize-sym", "symmetric NMF A ≈ exp_H(X) = UUᵀ");
    fsym->add_option("--input", input, "symmetric MatrixMarket A")->required();
    fsym->add_option("--out-factor", out_factor, "write U here");
    fsym->add_option("--out-point", out_point, "write X here");
    fsym->add_option("--taylor-degree", taylor_degree)->capture_default_str();
    detail::add_solver_flags(fsym, solver);
    summary_flag(fsym);

    auto* fns = app.add_subcommand("factorize", "nonsymmetric NMF A ≈ PQᵀ through the block embedding");
    fns->add_option("--input", input, "MatrixMarket A (m×n)")->required();
    fns->add_option("--gamma", gamma, "weight on the diagonal exponential terms");
    fns->add_option("--out-p", out_p)->capture_default_str();
    fns->add_option("--out-q", out_q)->capture_default_str();
    fns->add_option("--taylor-degree", taylor_degree)->capture_default_str();
    detail::add_solver_flags(fns, solver);
    summary_flag(fns);

    auto* sparse = app.add_subcommand("sparse", "sparse low-rank fit over the doubly nonnegative cone");
    sparse->add_option("--input", input, "symmetric MatrixMarket A")->required();
    sparse->add_option("--gamma", gamma, "l1 weight")->capture_default_str();
    sparse->add_option("--nu", nu, "trace weight")->capture_default_str();
    sparse->add_option("--out-point", out_point, "write X here");
    sparse->add_option("--out-factor", out_factor, "write U here");
    detail::add_solver_flags(sparse, solver);
    summary_flag(sparse);

    auto* rec = app.add_subcommand("recursive", "recursive deflation A_{k+1} = max(A_k − U_kU_kᵀ, 0)");
    rec->add_option("--input", input, "symmetric MatrixMarket A")->required();
    rec->add_option("--rounds", rounds)->capture_default_str();
    rec->add_option("--out-factor", out_factor, "write [U_1 … U_R] here");
    rec->add_option("--taylor-degree", taylor_degree)->capture_default_str();
    detail::add_solver_flags(rec, solver);
    summary_flag(rec);

    auto* cert = app.add_subcommand("certify", "primal, dual and gap of the KL problem at a point X");
    cert->add_option("--input", input, "symmetric MatrixMarket A")->required();
    cert->add_option("--point", point, "symmetric MatrixMarket X")->required();
    summary_flag(cert);

    auto* gen = app.add_subcommand("generate-graph", "random block graph");
    gen->add_option("--sizes", sizes, "comma-separated block sizes")->capture_default_str();
    gen->add_option("--alpha", alpha, "within-block threshold")->capture_default_str();
    gen->add_option("--beta", beta, "between-block threshold")->capture_default_str();
    gen->add_option("--seed", seed)->capture_default_str();
    gen->add_option("--out", out_graph)->capture_default_str();
    gen->add_option("--out-labels", out_labels, "ground-truth labels CSV");
    summary_flag(gen);

    auto* part = app.add_subcommand("partition", "cluster a graph into k blocks");
    part->add_option("--input", input, "MatrixMarket adjacency")->required();
    part->add_option("--k", k)->capture_default_str();
    part->add_option("--method", method)->check(CLI::IsMember({"nmf", "spectral"}))->capture_default_str();
    part->add_option("--seed", seed)->capture_default_str();
    part->add_option("--out-labels", out_labels, "labels CSV");
    part->add_flag("--ignore-diagonal", ignore_diagonal, "exclude self-pairs from perf");
    detail::add_solver_flags(part, solver);
    summary_flag(part);

    auto* bench = app.add_subcommand("benchmark", "perf sweep over an (alpha, beta) grid");
    bench->add_option("--grid", grid, "CSV of alpha,beta rows")->required();
    bench->add_option("--n", n)->capture_default_str();
    bench->add_option("--trials", trials)->capture_default_str();
    bench->add_option("--k", k)->capture_default_str();
    bench->add_option("--seed", seed)->capture_default_str();
    bench->add_option("--out", results)->capture_default_str();
    detail::add_solver_flags(bench, solver);
    summary_flag(bench);

    // Loss flags need per-subcommand defaults, so the default is applied
    // after parsing when the flag is absent.
    fsym->add_option("--loss", loss_name, "kl or mse")->check(CLI::IsMember({"kl", "mse"}));
    fns->add_option("--loss", loss_name, "kl or mse")->check(CLI::IsMember({"kl", "mse"}));
    rec->add_option("--loss", loss_name, "kl or mse")->check(CLI::IsMember({"kl", "mse"}));

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const auto t0 = std::chrono::steady_clock::now();
    RunSummary summary;
    auto finish = [&]() {
        summary.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        write_run_summary(out_summary, summary);
    };
    auto record_solver = [&]() {
        summary.parameters["tol"] = detail::num(solver.tol);
        summary.parameters["max_iter"] = std::to_string(solver.max_iter);
    };
    auto write_out = [&](const std::string& path, auto&& writer) {
        if (path.empty()) return;
        writer(path);
        summary.artifact_paths.push_back(path);
    };
    FactorizeOptions fopts;
    fopts.taylor_degree = taylor_degree;

    try {
        if (*fsym) {
            summary.command = "factorize-sym";
            const auto loss = parse_loss(loss_name);
            const SymMatrix a = read_sym_matrix(input);
            const auto res = symmetric_nmf(a, loss, std::nullopt, solver.options(), fopts);
            record_solver();
            summary.parameters["input"] = input;
            summary.parameters["loss"] = loss_name;
            summary.parameters["taylor_degree"] = std::to_string(taylor_degree);
            summary.objective = res.report.final_value;
            if (res.certificate) summary.gap = res.certificate->gap;
            summary.iterations = static_cast<std::size_t>(res.report.iterations);
            write_out(out_factor, [&](const std::string& p) { write_matrix(p, res.U); });
            write_out(out_point, [&](const std::string& p) { write_matrix(p, res.X); });
            out << "objective " << detail::num(res.report.final_value) << '\n';
            out << "gap " << (res.certificate ? detail::num(res.certificate->gap) : std::string("n/a")) << '\n';
            out << "iterations " << res.report.iterations << '\n';
            out << "stop " << to_string(res.report.stop_reason) << '\n';
            out << "factor_columns " << res.U.cols() << '\n';
            out << "factor_residual " << detail::num(res.factor_residual) << '\n';
        } else if (*fns) {
            summary.command = "factorize";
            if (fns->count("--loss") == 0) loss_name = "mse";
            if (fns->count("--gamma") == 0) gamma = NonsymConfig{}.gamma;
            const Matrix a = read_matrix(input);
            NonsymConfig cfg{gamma, parse_loss(loss_name)};
            const auto res = nonsymmetric_nmf(a, cfg, solver.options(), fopts);
            record_solver();
            summary.parameters["input"] = input;
            summary.parameters["loss"] = loss_name;
            summary.parameters["gamma"] = detail::num(gamma);
            summary.parameters["taylor_degree"] = std::to_string(taylor_degree);
            summary.objective = res.report.final_value;
            summary.iterations = static_cast<std::size_t>(res.report.iterations);
            write_out(out_p, [&](const std::string& p) { write_matrix(p, res.P); });
            write_out(out_q, [&](const std::string& p) { write_matrix(p, res.Q); });
            const Matrix pq = matmul_nt(res.P.matrix(), res.Q.matrix());
            const double an = frobenius_norm(a);
            const double rel = an > 0.0 ? frobenius_norm(a - pq) / an : frobenius_norm(pq);
            out << "objective " << detail::num(res.report.final_value) << '\n';
            out << "relative_error " << detail::num(rel) << '\n';
            out << "iterations " << res.report.iterations << '\n';
            out << "factor_columns " << res.P.cols() << '\n';
        } else if (*sparse) {
            summary.command = "sparse";
            const SymMatrix a = read_sym_matrix(input);
            const auto res = sparse_lowrank(a, {gamma, nu}, solver.options(), fopts);
            record_solver();
            summary.parameters["input"] = input;
            summary.parameters["gamma"] = detail::num(gamma);
            summary.parameters["nu"] = detail::num(nu);
            summary.objective = res.report.final_value;
            summary.iterations = static_cast<std::size_t>(res.report.iterations);
            write_out(out_point, [&](const std::string& p) { write_matrix(p, res.X); });
            write_out(out_factor, [&](const std::string& p) { write_matrix(p, res.U); });
            out << "objective " << detail::num(res.report.final_value) << '\n';
            out << "iterations " << res.report.iterations << '\n';
            out << "factor_residual " << detail::num(res.factor_residual) << '\n';
        } else if (*rec) {
            summary.command = "recursive";
            if (rec->count("--loss") == 0) loss_name = "mse";
            const auto loss = parse_loss(loss_name);
            const SymMatrix a = read_sym_matrix(input);
            RecursiveConfig rcfg;
            rcfg.rounds = rounds;
            const auto res = recursive_decompose(a, loss, rcfg, solver.options(), fopts);
            record_solver();
            summary.parameters["input"] = input;
            summary.parameters["loss"] = loss_name;
            summary.parameters["rounds"] = std::to_string(rounds);
            summary.objective = res.rounds.empty() ? std::nan("") : res.rounds.back().total_loss;
            std::size_t iters = 0;
            for (const auto& r : res.rounds) iters += static_cast<std::size_t>(r.report.iterations);
            summary.iterations = iters;
            write_out(out_factor, [&](const std::string& p) { write_matrix(p, res.U); });
            for (std::size_t i = 0; i < res.rounds.size(); ++i)
                out << "round " << i + 1 << " loss " << detail::num(res.rounds[i].total_loss) << " columns "
                    << res.rounds[i].columns << '\n';
            if (!res.stop_note.empty()) out << "note " << res.stop_note << '\n';
            out << "objective " << detail::num(summary.objective) << '\n';
        } else if (*cert) {
            summary.command = "certify";
            const SymMatrix a = read_sym_matrix(input);
            const SymMatrix x = read_sym_matrix(point);
            const auto c = duality_gap(a, x);
            summary.parameters["input"] = input;
            summary.parameters["point"] = point;
            summary.objective = c.primal_value;
            summary.gap = c.gap;
            out << "primal " << detail::num(c.primal_value) << '\n';
            out << "dual " << detail::num(c.dual_value) << '\n';
            out << "gap " << detail::num(c.gap) << '\n';
        } else if (*gen) {
            summary.command = "generate-graph";
            GraphGenConfig cfg{detail::parse_sizes(sizes), alpha, beta, seed};
            const auto g = generate_block_graph(cfg);
            summary.parameters["sizes"] = sizes;
            summary.parameters["alpha"] = detail::num(alpha);
            summary.parameters["beta"] = detail::num(beta);
            summary.parameters["seed"] = std::to_string(seed);
            double edges = 0.0;
            for (double v : g.graph.adjacency().values()) edges += v;
            summary.objective = edges / 2.0;
            write_out(out_graph, [&](const std::string& p) { write_matrix(p, g.graph.adjacency()); });
            write_out(out_labels, [&](const std::string& p) { write_labels_csv(p, g.truth); });
            out << "nodes " << g.graph.n() << '\n';
            out << "edges " << static_cast<long long>(edges / 2.0) << '\n';
        } else if (*part) {
            summary.command = "partition";
            const Graph g(read_sym_matrix(input));
            const PartitionLabels labels = method == "nmf" ? nmf_partition(g, k, solver.options())
                                                           : spectral_partition(g, k, seed);
            const double perf = partition_performance(g, labels, ignore_diagonal);
            summary.parameters["input"] = input;
            summary.parameters["k"] = std::to_string(k);
            summary.parameters["method"] = method;
            summary.parameters["seed"] = std::to_string(seed);
            summary.parameters["ignore_diagonal"] = ignore_diagonal ? "true" : "false";
            if (method == "nmf") record_solver();
            summary.objective = perf;
            write_out(out_labels, [&](const std::string& p) { write_labels_csv(p, labels); });
            out << "perf " << detail::num(perf) << '\n';
        } else if (*bench) {
            summary.command = "benchmark";
            const auto pts = read_grid_csv(grid);
            const auto rows = benchmark_sweep(pts, n, trials, k, seed, solver.options());
            summary.parameters["grid"] = grid;
            summary.parameters["n"] = std::to_string(n);
            summary.parameters["trials"] = std::to_string(trials);
            summary.parameters["k"] = std::to_string(k);
            summary.parameters["seed"] = std::to_string(seed);
            record_solver();
            double mean = 0.0;
            for (const auto& r : rows) mean += r.mean_perf;
            summary.objective = rows.empty() ? 0.0 : mean / static_cast<double>(rows.size());
            write_out(results, [&](const std::string& p) { write_results_csv(p, rows); });
            out << format_results_csv(rows);
        }
        finish();
        return kExitOk;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

} // namespace cvxnmf::cli
