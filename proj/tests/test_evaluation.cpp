#include "doctest.h"

#include <map>
#include <random>
#include <vector>

#include "multilink/evaluation.hpp"

using namespace multilink;

TEST_CASE("error rates read off the confusion matrix") {
    ConfusionMatrix diag(5);
    for (Index p = 0; p < 5; ++p) diag.counts(p, p) = 10 + p;
    CHECK(ome(diag) == 0.0);
    CHECK(mwge(diag) == 0.0);
    CHECK(ome(diag, ScoreMode::undeclared_as_error) == 0.0);
    CHECK(mwge(diag, ScoreMode::undeclared_as_error) == 0.0);

    // one error among ten decided tuples
    ConfusionMatrix toy(2);
    toy.counts(0, 0) = 6;
    toy.counts(1, 1) = 3;
    toy.counts(1, 0) = 1;
    CHECK(ome(toy) == doctest::Approx(0.1));

    // per-class rates 0.2 and 0.0 average to 0.1 whatever the sizes
    ConfusionMatrix lopsided(2);
    lopsided.counts(0, 0) = 8;
    lopsided.counts(0, 1) = 2;
    lopsided.counts(1, 1) = 1000;
    CHECK(mwge(lopsided) == doctest::Approx(0.1));
    CHECK(ome(lopsided) == doctest::Approx(2.0 / 1010.0));

    // replicating one class's members leaves mwge unchanged
    ConfusionMatrix bigger = lopsided;
    bigger.counts.row(0) *= 7;
    CHECK(mwge(bigger) == doctest::Approx(mwge(lopsided)));

    // undeclared handling differs by mode
    ConfusionMatrix held(2);
    held.counts(0, 0) = 5;
    held.counts(0, 2) = 5; // undeclared column
    held.counts(1, 1) = 10;
    CHECK(ome(held, ScoreMode::declared_only) == 0.0);
    CHECK(ome(held, ScoreMode::undeclared_as_error) == doctest::Approx(0.25));
    CHECK(mwge(held, ScoreMode::declared_only) == 0.0);
    CHECK(mwge(held, ScoreMode::undeclared_as_error) == doctest::Approx(0.25));

    // all undeclared: no declared scope, full error otherwise
    ConfusionMatrix silent(2);
    silent.counts(0, 2) = 4;
    silent.counts(1, 2) = 6;
    CHECK_THROWS_AS(ome(silent, ScoreMode::declared_only), ScoringError);
    CHECK_THROWS_AS(mwge(silent, ScoreMode::declared_only), ScoringError);
    CHECK(ome(silent, ScoreMode::undeclared_as_error) == 1.0);
    CHECK(mwge(silent, ScoreMode::undeclared_as_error) == 1.0);

    // empty classes drop out of the mean
    ConfusionMatrix sparse(3);
    sparse.counts(0, 0) = 5;
    sparse.counts(2, 0) = 1;
    sparse.counts(2, 2) = 1;
    CHECK(mwge(sparse) == doctest::Approx(0.25));

    ConfusionMatrix empty(3);
    CHECK_THROWS_AS(ome(empty), ScoringError);
    CHECK_THROWS_AS(mwge(empty), ScoringError);
}

TEST_CASE("tuple-level and pattern-level tabulations agree") {
    PopulationSpec spec;
    spec.k = 3;
    spec.overlap = {{{0, 1, 2}, 3}, {{0, 1}, 2}, {{0}, 3}, {{1}, 2}, {{2}, 4}};
    spec.fields = {{"blk", false, 3, 0, 0, true},
                   {"cat", false, 4, 0, 0, false},
                   {"num", true, 0, 0, 5, false}};
    Population pop = generate_population(spec, 2121);
    std::map<std::string, Scalar> beta = {{"cat", 0.2}, {"num", 0.2}};
    std::vector<DataFile> observed = corrupt_files(pop.files, spec, beta, 11);

    PatternSpace space = enumerate_patterns(3);
    TableOptions options;
    options.keep_tuples = true;
    PatternTable table = build_pattern_table(observed, comparators_for(spec), options,
                                             make_true_class_fn(pop.truth, space));

    FitOptions fit_options;
    fit_options.restarts = 2;
    fit_options.seed = 5;
    fit_options.max_iters = 60;
    FitResult fitted = fit(table, fit_options);
    ErrorLevels levels = ErrorLevels::uniform(space, 0.05);

    ConfusionMatrix per_tuple = confusion(pop.truth, classify(fitted, table, levels), space);
    ConfusionMatrix per_row = confusion_from_rows(classify_rows(fitted.params, table, levels), table);
    CHECK((per_tuple.counts.array() == per_row.counts.array()).all());
    CHECK(per_tuple.total() == table.total_tuples());

    // hand tally: every tuple's truth, decided class from its assignment
    std::vector<Assignment> assignments = classify(fitted, table, levels);
    CountMat direct = CountMat::Zero(space.size(), space.size() + 1);
    for (const Assignment& a : assignments) {
        const Index truth = space.index_of(
            pop.truth.true_class(std::span<const std::int32_t>(a.records.data(), a.records.size())));
        direct(truth, a.declared ? a.candidate : space.size()) += 1;
    }
    CHECK((per_tuple.counts.array() == direct.array()).all());

    // row sums recover the true-class totals
    CountVec true_totals = CountVec::Zero(space.size());
    const auto& ids = pop.truth.entity_ids;
    for (std::int32_t a = 0; a < static_cast<std::int32_t>(ids[0].size()); ++a)
        for (std::int32_t b = 0; b < static_cast<std::int32_t>(ids[1].size()); ++b)
            for (std::int32_t c = 0; c < static_cast<std::int32_t>(ids[2].size()); ++c) {
                const std::int32_t tuple[] = {a, b, c};
                true_totals(space.index_of(
                    pop.truth.true_class(std::span<const std::int32_t>(tuple, 3)))) += 1;
            }
    for (Index p = 0; p < space.size(); ++p) CHECK(per_tuple.counts.row(p).sum() == true_totals(p));

    // out-of-range tuples are rejected
    std::vector<Assignment> broken = {assignments[0]};
    broken[0].records = {0, 99, 0};
    CHECK_THROWS_AS(confusion(pop.truth, broken, space), ScoringError);
    ConfusionMatrix bare_err;
    PatternTable bare = build_pattern_table(observed, comparators_for(spec));
    CHECK_THROWS_AS(confusion_from_rows(classify_rows(fitted.params, bare, levels), bare),
                    ScoringError);
}
