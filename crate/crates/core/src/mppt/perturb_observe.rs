use super::MpptState;

/// One Perturb & Observe iteration on the duty cycle.
///
/// A power rise keeps the perturbation direction, a drop reverses it and an
/// unchanged power leaves the duty cycle where it is.
pub fn po_step(p_now: f64, v_now: f64, state: &MpptState) -> MpptState {
    let delta_p = p_now - state.p_prev;
    let mut next = *state;
    if delta_p != 0.0 {
        if delta_p < 0.0 {
            next.direction = -state.direction;
        }
        next.d = state.clamp_duty(state.d + f64::from(next.direction) * state.delta_d);
    }
    next.p_prev = p_now;
    next.v_prev = v_now;
    next
}
