"""Individual transit path recommendations under service disruptions."""

from .benders import BendersResult, BendersState, Cut, DualPack, run_benders
from .choice import (ChoiceModel, FlowMoments, flow_moments,
                     mnl_probabilities, sample_realization,
                     synthesize_case_preferences)
from .evaluate import (EvaluationReport, capacity_based_plan, event_oracle,
                       evaluate_status_quo, monte_carlo_eval,
                       preference_metrics, psi_sweep, status_quo_flows)
from .flows import (FixedFlowInfeasibleError, FlowInfeasibleError,
                    FlowSolution, build_flow_model, solve_optimal_flow,
                    solve_with_fixed_flows, verify_flow_solution)
from .lp import LinearModel, SolveOutcome, Tolerances, solve_lp, solve_mip
from .recommend import (InfeasiblePlanError, RecommendationPlan, build_ipr,
                        solve_ipr_direct)
from .scenario import (Scenario, ScenarioError, leg_timing, load_scenario,
                       scenario_to_dict)

__version__ = "0.1.0"
