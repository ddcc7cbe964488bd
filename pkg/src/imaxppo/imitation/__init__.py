from .buffer import EmptyBufferError, ExpertBuffer, collect_local_expert, collect_tabular_expert, empirical_measures, local_buffer, tabular_buffer
from .tabular import (
    FitReport,
    fit_tabular,
    inverse_soft_bellman,
    iq_update_tabular,
    j_compact,
    j_compact_parts,
    j_gradient,
    j_occupancy,
    l_occupancy,
    lse,
    occupancy,
    policy_from_q,
    soft_bellman,
    solve_fixed_point,
    state_occupancy,
    v_policy,
    v_soft,
    weighted_tv,
)
from .local import (
    ImitatorNets,
    actor_objective,
    anchor_penalty,
    critic_update,
    j_local,
    masked_lse,
    masked_softmax,
    predict_joint_atoms,
    predict_next_enemy_states,
    sac_actor_update,
)
