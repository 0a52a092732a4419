"""
Unit tests for the manipulator kinematics and dynamics.
"""

import json
import os
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from src.manipulator.dynamics import (
    bias_forces,
    compute_terms,
    forward_dynamics,
    gravity_torques,
    inverse_dynamics,
    kinetic_energy,
    mass_matrix
)
from src.manipulator.kinematics import cross_rows, forward_kinematics, jacobian, jdot_qdot, link_frames
from src.manipulator.model import (
    ConfigurationError,
    JointState,
    LinkSpec,
    load_robot_model,
    robot_model_from_dict
)
from src.simulation.engine import rk4_step
from tests.fixtures import TWO_LINK, UR10

angles = st.floats(min_value=-np.pi, max_value=np.pi, allow_nan=False)
rates = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def two_link_mass(q2):
    c2 = np.cos(q2)
    return np.array([[3.0 + 2.0 * c2, 1.0 + c2], [1.0 + c2, 1.0]])


def dh_chain(model, q):
    """World 4x4 frames from a plain product of DH matrices."""
    frames = [np.eye(4)]
    for link, angle in zip(model.links, q):
        theta = angle + link.dh_theta_offset
        ct, st = np.cos(theta), np.sin(theta)
        ca, sa = np.cos(link.dh_alpha), np.sin(link.dh_alpha)
        frames.append(frames[-1] @ np.array([
            [ct, -st * ca, st * sa, link.dh_a * ct],
            [st, ct * ca, -ct * sa, link.dh_a * st],
            [0.0, sa, ca, link.dh_d],
            [0.0, 0.0, 0.0, 1.0]
        ]))
    return frames


def newton_euler(model, q, dq, qdd):
    """Joint torques from a link-by-link Newton-Euler recursion."""
    frames = dh_chain(model, q)
    n = model.n_joints
    omega = np.zeros(3)
    alpha = np.zeros(3)
    acc = -model.gravity
    forces, moments, com_arms = [], [], []
    for i, link in enumerate(model.links):
        axis = frames[i][:3, 2]
        omega_prev = omega
        omega = omega_prev + axis * dq[i]
        alpha = alpha + axis * qdd[i] + np.cross(omega_prev, axis) * dq[i]
        arm = frames[i + 1][:3, 3] - frames[i][:3, 3]
        acc = acc + np.cross(alpha, arm) + np.cross(omega, np.cross(omega, arm))
        rotation = frames[i + 1][:3, :3]
        offset = rotation @ link.com
        acc_com = acc + np.cross(alpha, offset) + np.cross(omega, np.cross(omega, offset))
        inertia = rotation @ link.inertia @ rotation.T
        forces.append(link.mass * acc_com)
        moments.append(inertia @ alpha + np.cross(omega, inertia @ omega))
        com_arms.append(arm + offset)

    torque = np.zeros(n)
    force = np.zeros(3)
    moment = np.zeros(3)
    for i in reversed(range(n)):
        arm = frames[i + 1][:3, 3] - frames[i][:3, 3]
        moment = moments[i] + moment + np.cross(com_arms[i], forces[i]) + np.cross(arm, force)
        force = forces[i] + force
        torque[i] = moment @ frames[i][:3, 2]
    return torque + model.friction * dq


class TestRobotModel(unittest.TestCase):
    """Test cases for model loading and validation."""

    def test_two_link_file(self):
        """Test loading the planar two-link model."""
        self.assertEqual(TWO_LINK.n_joints, 2)
        self.assertTrue(np.allclose(TWO_LINK.gravity, [0.0, -9.81, 0.0]))

    def test_ur10_file(self):
        """Test loading the UR10 model."""
        self.assertEqual(UR10.n_joints, 6)
        self.assertTrue(np.allclose(UR10.friction, 0.0))

    def test_rejects_non_positive_mass(self):
        """Test rejection of a massless link."""
        with self.assertRaises(ConfigurationError):
            LinkSpec(1.0, 0.0, 0.0, 0.0, 0.0, [0, 0, 0], np.zeros((3, 3)))

    def test_rejects_inertia_violating_triangle_inequality(self):
        """Test rejection of non-physical principal moments."""
        with self.assertRaises(ConfigurationError):
            LinkSpec(1.0, 0.0, 0.0, 0.0, 1.0, [0, 0, 0], np.diag([0.1, 0.1, 1.0]))

    def test_rejects_asymmetric_inertia(self):
        """Test rejection of an asymmetric inertia tensor."""
        inertia = np.eye(3)
        inertia[0, 1] = 0.5
        with self.assertRaises(ConfigurationError):
            LinkSpec(1.0, 0.0, 0.0, 0.0, 1.0, [0, 0, 0], inertia)

    def test_rejects_mismatched_joint_count(self):
        """Test rejection of an n_joints that disagrees with the links."""
        data = TWO_LINK.to_dict()
        data["n_joints"] = 3
        with self.assertRaises(ConfigurationError):
            robot_model_from_dict(data)

    def test_missing_link_key(self):
        """Test the error for a link without a required key."""
        data = TWO_LINK.to_dict()
        del data["links"][0]["mass"]
        with self.assertRaises(ConfigurationError):
            robot_model_from_dict(data)

    def test_round_trip_through_file(self):
        """Test saving a model and loading it back."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "arm.json")
            with open(path, 'w') as f:
                json.dump(UR10.to_dict(), f)
            model = load_robot_model(path)
        q = np.array([0.3, -0.4, 0.5, 0.1, -0.2, 0.7])
        self.assertTrue(np.allclose(forward_kinematics(model, q), forward_kinematics(UR10, q)))

    def test_missing_file(self):
        """Test the error for a missing model file."""
        with self.assertRaises(FileNotFoundError):
            load_robot_model("/nonexistent/arm.json")

    def test_wrong_vector_length(self):
        """Test rejection of joint vectors of the wrong length."""
        with self.assertRaises(ConfigurationError):
            forward_kinematics(UR10, np.zeros(5))


class TestKinematics(unittest.TestCase):
    """Test cases for forward kinematics and Jacobians."""

    def test_two_link_positions(self):
        """Test planar end-effector positions at known postures."""
        self.assertTrue(np.allclose(forward_kinematics(TWO_LINK, [0.0, 0.0]), [2.0, 0.0, 0.0]))
        self.assertTrue(np.allclose(forward_kinematics(TWO_LINK, [np.pi / 2, 0.0]), [0.0, 2.0, 0.0]))
        self.assertTrue(np.allclose(forward_kinematics(TWO_LINK, [0.0, np.pi / 2]), [1.0, 1.0, 0.0]))

    @given(angles, angles)
    def test_two_link_closed_form(self, q1, q2):
        """Test planar forward kinematics against the closed form."""
        expected = [np.cos(q1) + np.cos(q1 + q2), np.sin(q1) + np.sin(q1 + q2), 0.0]
        self.assertTrue(np.allclose(forward_kinematics(TWO_LINK, [q1, q2]), expected, atol=1e-12))

        s1, c1 = np.sin(q1), np.cos(q1)
        s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
        expected_jac = np.array([[-s1 - s12, -s12], [c1 + c12, c12], [0.0, 0.0]])
        self.assertTrue(np.allclose(jacobian(TWO_LINK, [q1, q2]), expected_jac, atol=1e-12))

    def test_ur10_zero_posture(self):
        """Test the UR10 end-effector position at the zero posture."""
        # a2 + a3 along x, -(d4 + d6) along y, d1 - d5 along z
        expected = [-0.612 - 0.5723, -(0.163941 + 0.0922), 0.1273 - 0.1157]
        self.assertTrue(np.allclose(forward_kinematics(UR10, np.zeros(6)), expected, atol=1e-12))

    @settings(max_examples=30)
    @given(st.lists(angles, min_size=6, max_size=6))
    def test_frames_match_homogeneous_chain(self, q):
        """Test the frame recursion against a product of 4x4 DH matrices."""
        rotations, origins = link_frames(UR10, q)
        for i, frame in enumerate(dh_chain(UR10, q)):
            self.assertTrue(np.allclose(rotations[i], frame[:3, :3], atol=1e-12))
            self.assertTrue(np.allclose(origins[i], frame[:3, 3], atol=1e-12))

    def test_cross_rows_matches_numpy(self):
        """Test the batched cross product against numpy."""
        rng = np.random.default_rng(5)
        a = rng.normal(size=(4, 6, 3))
        b = rng.normal(size=(6, 3))
        self.assertTrue(np.allclose(cross_rows(a, b), np.cross(a, b)))

    @settings(max_examples=30)
    @given(st.lists(angles, min_size=6, max_size=6))
    def test_ur10_jacobian_matches_finite_differences(self, q):
        """Test the UR10 Jacobian against finite differences."""
        q = np.array(q)
        eps = 1e-6
        numeric = np.empty((3, 6))
        for i in range(6):
            step = np.zeros(6)
            step[i] = eps
            numeric[:, i] = (forward_kinematics(UR10, q + step) - forward_kinematics(UR10, q - step)) / (2 * eps)
        self.assertTrue(np.allclose(jacobian(UR10, q), numeric, atol=1e-7))

    @settings(max_examples=30)
    @given(st.lists(angles, min_size=6, max_size=6), st.lists(rates, min_size=6, max_size=6))
    def test_jdot_qdot_matches_finite_differences(self, q, dq):
        """Test J_dot q_dot against a finite difference of J q_dot."""
        q, dq = np.array(q), np.array(dq)
        eps = 1e-6
        numeric = (jacobian(UR10, q + eps * dq) - jacobian(UR10, q - eps * dq)) / (2 * eps) @ dq
        self.assertTrue(np.allclose(jdot_qdot(UR10, JointState(q, dq)), numeric, atol=1e-6))

    def test_two_link_centripetal_acceleration(self):
        """Test the centripetal end-effector acceleration of a spinning planar arm."""
        state = JointState([0.0, 0.0], [1.0, 0.0])
        self.assertTrue(np.allclose(jdot_qdot(TWO_LINK, state), [-2.0, 0.0, 0.0]))

    def test_jdot_qdot_zero_at_rest(self):
        """Test that J_dot q_dot vanishes at rest."""
        state = JointState(np.array([0.2, -0.3, 0.4, 0.0, 0.1, 0.0]), np.zeros(6))
        self.assertTrue(np.allclose(jdot_qdot(UR10, state), 0.0))


class TestDynamics(unittest.TestCase):
    """Test cases for the Newton-Euler dynamics."""

    def test_two_link_mass_matrix_straight(self):
        """Test the planar mass matrix with the arm stretched out."""
        self.assertTrue(np.allclose(mass_matrix(TWO_LINK, [0.0, 0.0]), [[5.0, 2.0], [2.0, 1.0]]))

    @given(angles, angles)
    def test_two_link_mass_matrix_closed_form(self, q1, q2):
        """Test the planar mass matrix against the closed form."""
        self.assertTrue(np.allclose(mass_matrix(TWO_LINK, [q1, q2]), two_link_mass(q2), atol=1e-10))

    def test_two_link_gravity_straight(self):
        """Test planar gravity torques with the arm stretched out."""
        self.assertTrue(np.allclose(gravity_torques(TWO_LINK, [0.0, 0.0]), [29.43, 9.81]))

    @given(angles, angles, rates, rates)
    def test_two_link_bias_closed_form(self, q1, q2, dq1, dq2):
        """Test the planar bias torque against the closed form."""
        s2 = np.sin(q2)
        g = 9.81
        expected = np.array([
            -s2 * (2.0 * dq1 * dq2 + dq2 ** 2) + 2.0 * g * np.cos(q1) + g * np.cos(q1 + q2),
            s2 * dq1 ** 2 + g * np.cos(q1 + q2)
        ])
        actual = bias_forces(TWO_LINK, JointState([q1, q2], [dq1, dq2]))
        self.assertTrue(np.allclose(actual, expected, atol=1e-9))

    @settings(max_examples=30)
    @given(st.lists(angles, min_size=6, max_size=6))
    def test_ur10_mass_matrix_symmetric_positive_definite(self, q):
        """Test that the UR10 mass matrix is symmetric positive definite."""
        mass = mass_matrix(UR10, q)
        self.assertTrue(np.allclose(mass, mass.T))
        self.assertGreater(np.linalg.eigvalsh(mass)[0], 0.0)

    def test_ur10_matches_link_by_link_recursion(self):
        """Test mass matrix, bias and inverse dynamics against a link-by-link recursion."""
        data = UR10.to_dict()
        data["friction"] = [0.3, 0.2, 0.1, 0.05, 0.05, 0.02]
        damped = robot_model_from_dict(data)
        rng = np.random.default_rng(19)
        zero = np.zeros(6)
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 6)
            dq = rng.uniform(-2.0, 2.0, 6)
            state = JointState(q, dq)
            self.assertTrue(np.allclose(bias_forces(damped, state), newton_euler(damped, q, dq, zero), atol=1e-9))

            mass = mass_matrix(damped, q)
            at_rest = newton_euler(damped, q, zero, zero)
            for j in range(6):
                unit = np.zeros(6)
                unit[j] = 1.0
                self.assertTrue(np.allclose(mass[:, j], newton_euler(damped, q, zero, unit) - at_rest, atol=1e-9))

            qdd = rng.uniform(-3.0, 3.0, 6)
            self.assertTrue(np.allclose(inverse_dynamics(damped, state, qdd), newton_euler(damped, q, dq, qdd),
                                        atol=1e-9))

    def test_terms_share_inverse_mass(self):
        """Test the inverse mass matrix carried by compute_terms."""
        state = JointState([0.3, -0.9, 1.2, 0.1, -0.4, 0.8], [0.2, -0.1, 0.4, 0.0, 0.3, -0.2])
        terms = compute_terms(UR10, state)
        self.assertTrue(np.allclose(terms.mass_inv @ terms.mass, np.eye(6), atol=1e-9))
        self.assertTrue(np.array_equal(terms.mass_inv, terms.mass_inv.T))
        tau = np.array([10.0, -40.0, 15.0, 2.0, -1.0, 0.5])
        self.assertTrue(np.allclose(terms.accelerations(tau), forward_dynamics(UR10, state, tau), atol=1e-8))

    def test_inverse_and_forward_dynamics_agree(self):
        """Test that forward dynamics inverts inverse dynamics."""
        rng = np.random.default_rng(3)
        for _ in range(10):
            state = JointState(rng.uniform(-np.pi, np.pi, 6), rng.uniform(-1, 1, 6))
            qdd = rng.uniform(-2, 2, 6)
            tau = inverse_dynamics(UR10, state, qdd)
            self.assertTrue(np.allclose(forward_dynamics(UR10, state, tau), qdd, atol=1e-9))

    def test_power_balance(self):
        """dKE/dt equals the power of the non-gravity torque when friction is zero."""
        rng = np.random.default_rng(7)
        eps = 1e-6
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, 6)
            dq = rng.uniform(-1, 1, 6)
            tau = rng.uniform(-20, 20, 6)
            state = JointState(q, dq)
            qdd = forward_dynamics(UR10, state, tau)
            mass_dot = (mass_matrix(UR10, q + eps * dq) - mass_matrix(UR10, q - eps * dq)) / (2 * eps)
            ke_dot = dq @ mass_matrix(UR10, q) @ qdd + 0.5 * dq @ mass_dot @ dq
            power = dq @ (tau - gravity_torques(UR10, q))
            self.assertAlmostEqual(ke_dot, power, delta=1e-5 * max(1.0, abs(power)))

    def test_friction_adds_to_bias(self):
        """Test that viscous friction adds D dq to the bias."""
        data = TWO_LINK.to_dict()
        data["friction"] = [0.5, 0.25]
        damped = robot_model_from_dict(data)
        state = JointState([0.3, 0.4], [1.0, -2.0])
        difference = bias_forces(damped, state) - bias_forces(TWO_LINK, state)
        self.assertTrue(np.allclose(difference, [0.5, -0.5]))

    def test_energy_conserved_without_gravity(self):
        """Test kinetic energy drift of an unforced RK4 run."""
        data = UR10.to_dict()
        data["gravity"] = [0.0, 0.0, 0.0]
        free = robot_model_from_dict(data)
        q = np.array([0.3, -0.8, 1.1, -0.4, 0.6, 0.2])
        dq = np.array([0.8, -0.5, 0.6, 1.0, -0.7, 0.9])
        energy = kinetic_energy(free, JointState(q, dq))
        for _ in range(1000):
            q, dq = rk4_step(free, q, dq, np.zeros(6), 1e-3)
        drift = abs(kinetic_energy(free, JointState(q, dq)) - energy) / energy
        self.assertLess(drift, 1e-4)

    def test_kinetic_energy(self):
        """Test kinetic energy of a spinning planar arm."""
        state = JointState([0.0, 0.0], [1.0, 0.0])
        self.assertAlmostEqual(kinetic_energy(TWO_LINK, state), 2.5)

    def test_compute_terms_consistent(self):
        """Test that compute_terms agrees with the single-quantity functions."""
        state = JointState(np.array([0.1, -0.5, 0.7, 0.2, -0.3, 0.4]), np.array([0.5, 0.1, -0.2, 0.3, 0.0, 0.1]))
        terms = compute_terms(UR10, state)
        self.assertTrue(np.allclose(terms.mass, mass_matrix(UR10, state.q)))
        self.assertTrue(np.allclose(terms.bias, bias_forces(UR10, state)))
        self.assertTrue(np.allclose(terms.jacobian, jacobian(UR10, state.q)))
        self.assertTrue(np.allclose(terms.ee_pos, forward_kinematics(UR10, state.q)))
        self.assertTrue(np.allclose(terms.ee_vel, jacobian(UR10, state.q) @ state.dq))
        self.assertTrue(np.allclose(terms.jdot_qdot, jdot_qdot(UR10, state)))


if __name__ == '__main__':
    unittest.main()
