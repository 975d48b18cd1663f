// Builds a 1000-peer overlay, follows one search, then runs a small batch.

#include "nbdt/experiments.hpp"
#include "nbdt/report.hpp"

#include <iostream>

int main()
{
    using namespace nbdt;

    System sys;
    InitConfig init;
    init.nodes = 1000;
    init.seed = 7;
    sys.init(init);

    const SystemStatus st = sys.status();
    std::cout << st.node_count << " peers hold " << st.key_count << " keys in [" << st.key_range->lo << ", "
              << st.key_range->hi << "]\n";

    // Key 184 lives on peer 14 (bucket width 14).
    const OpOutcome walk = sys.do_op(MessageType::Search, 184, 5);
    for (const std::string &line : walk.log_lines)
    {
        std::cout << "  " << line << "\n";
    }
    std::cout << "  -> " << to_string(walk.outcome) << " at peer " << walk.holder << " after " << walk.hops << " hops\n";

    ExperimentConfig batch;
    batch.trials = 200;
    batch.dist = DistributionKind::PowLaw;
    const ExperimentResult r = sys.run_experiment(batch);
    std::cout << "200 power-law searches: mean " << r.mean_hops << " hops, max " << r.max_hops << "\n";
    return 0;
}
