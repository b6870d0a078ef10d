import tempfile
import unittest
from pathlib import Path
import numpy as np
from ..config import load_config, parse_config
from ..experiment import Experiment
from ...exceptions import ConfigError

CONFIGS = Path(__file__).resolve().parents[2] / 'configs'

PLAN = '''experiment = plan
budget.B = 30
budget.B_h = 8
budget.B_z = 0.24
chain.T = 50
'''

def issues_of(text):
    try:
        parse_config(text)
    except ConfigError as e:
        return e.issues
    raise AssertionError('configuration parsed')

class TestParseConfig(unittest.TestCase):
    def testEmpty(self):
        issues = issues_of('')
        self.assertEqual(len(issues), 1)
        self.assertEqual(issues[0].line, 0)
        self.assertEqual(issues[0].message, 'experiment missing')
        self.assertEqual(str(issues[0]), 'experiment missing')

    def testMinimalPlan(self):
        config = parse_config(PLAN)
        self.assertIs(config.experiment, Experiment.plan)
        self.assertEqual(config.chain.T, 50)
        self.assertEqual(config.budget.B, 30.0)
        self.assertEqual(config.budget.B_z, 0.24)
        self.assertEqual(config.run.seeds, (0, 1, 2, 3, 4))
        self.assertIsNone(config.run.n_samples)

    def testDefaults(self):
        config = parse_config(PLAN)
        spec = config.chain.spec()
        self.assertEqual(spec.backbone.kind, 'mlp-tanh')
        self.assertEqual(spec.d, 2)
        np.testing.assert_equal(spec.reward.target, [0.5, -0.5])
        self.assertIsNone(spec.x_T)
        self.assertEqual(spec.sigma_param, 0.01)
        self.assertEqual(config.estimator.kind, 'rlr')
        self.assertEqual(config.estimator.h, 2)

    def testCommentsAndBlankLines(self):
        config = parse_config('# plan\n\n' + PLAN.replace('chain.T = 50', 'chain.T = 50  # steps'))
        self.assertEqual(config.chain.T, 50)

    def testDuplicateKey(self):
        issues = issues_of(PLAN + 'budget.B = 31\n')
        self.assertEqual(len(issues), 1)
        self.assertEqual(issues[0].line, 6)
        self.assertIn('lines 2 and 6', issues[0].message)

    def testUnknownKey(self):
        issues = issues_of(PLAN + 'chain.steps = 4\n')
        self.assertEqual([i.line for i in issues], [6])
        self.assertIn("unknown key 'chain.steps'", issues[0].message)
        self.assertEqual(str(issues[0]), "line 6: unknown key 'chain.steps'")

    def testTypeMismatch(self):
        issues = issues_of(PLAN.replace('chain.T = 50', 'chain.T = fifty'))
        self.assertEqual(issues[0].line, 5)
        self.assertIn('expected int', issues[0].message)

    def testAllIssuesCollected(self):
        issues = issues_of(PLAN + 'chain.steps = 4\nrun.batch = many\nno equals sign\n')
        self.assertEqual(sorted(i.line for i in issues), [6, 7, 8])

    def testUnknownExperiment(self):
        issues = issues_of('experiment = sweep\n')
        self.assertIn("unknown experiment 'sweep'", issues[0].message)

    def testMissingSection(self):
        issues = issues_of('experiment = bias\nchain.T = 5\n')
        self.assertEqual(issues[0].line, 0)
        self.assertIn('missing section run', issues[0].message)

        issues = issues_of('experiment = bias\nrun.batch = 4\n')
        self.assertIn('missing key run.n_samples', issues[0].message)

        issues = issues_of('experiment = plan\n')
        self.assertIn('missing section budget', issues[0].message)

    def testStepSizeRequired(self):
        issues = issues_of('experiment = train\nrun.iterations = 3\n')
        self.assertIn('missing key run.step_size', issues[0].message)
        config = parse_config('experiment = train\nrun.iterations = 3\nrun.optimizer = theorem2\n')
        self.assertEqual(config.run.optimizer, 'theorem2')

    def testBudgetInvariant(self):
        issues = issues_of(PLAN.replace('budget.B_h = 8', 'budget.B_h = 0.1'))
        self.assertEqual(issues[0].line, 2)
        self.assertIn('B_h > B_z', issues[0].message)

    def testPlanInvariant(self):
        issues = issues_of('experiment = bias\nchain.T = 2\nrun.n_samples = 10\n')
        self.assertTrue(any('T >= 3' in i.message for i in issues))

    def testWindowInvariant(self):
        issues = issues_of(PLAN + 'estimator.j_policy = windowed-uniform\n')
        self.assertIn('window', issues[0].message)
        issues = issues_of(PLAN + 'estimator.j_policy = windowed-uniform\nestimator.window_a = 30\n')
        self.assertIn('window_b', issues[0].message)
        config = parse_config(
            PLAN + 'estimator.j_policy = windowed-uniform\nestimator.window_a = 30\n'+
            'estimator.window_b = 40\n')
        self.assertEqual(config.estimator.sampler().window, (30, 40))

    def testExplicitParams(self):
        text = 'experiment = plan\nbudget.B = 30\nchain.d = 1\nchain.backbone = linear-affine\n'
        config = parse_config(text + 'chain.params = 0.9, 0.1\n')
        spec = config.chain.spec()
        np.testing.assert_equal(config.chain.initial_params(spec), [0.9, 0.1])
        issues = issues_of(text + 'chain.params = 0.9\n')
        self.assertIn('expected 2 parameters', issues[0].message)

    def testFixedStart(self):
        config = parse_config(PLAN + 'chain.x_T = 1.0, -1.0\n')
        self.assertEqual(config.chain.spec().x_T, (1.0, -1.0))

    def testOverrides(self):
        config = parse_config(PLAN + 'run.seeds = 3, 4\noutput.path = out\n')
        overridden = config.with_overrides(None, seed_offset=10)
        self.assertEqual(overridden.run.seeds, (13, 14))
        self.assertEqual(overridden.output_path, 'out')
        self.assertEqual(config.with_overrides('elsewhere').output_path, 'elsewhere')

class TestShippedConfigs(unittest.TestCase):
    def testAllParse(self):
        paths = sorted(CONFIGS.glob('*.cfg'))
        self.assertGreaterEqual(len(paths), 6)
        for path in paths:
            config = load_config(path)
            self.assertEqual(config.experiment.value,
                             'selftest' if path.stem == 'reference' else path.stem)

    def testLongRangeParams(self):
        config = load_config(CONFIGS / 'truncation.cfg')
        spec = config.chain.spec()
        np.testing.assert_equal(config.chain.initial_params(spec), [0.9, 0.0, 0.0])
        self.assertTrue(spec.backbone.time_conditioning)

    def testMissingFile(self):
        self.assertRaises(FileNotFoundError, load_config, CONFIGS / 'missing.cfg')

    def testInvalidUtf8(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'binary.cfg'
            path.write_bytes(PLAN.encode() + b'chain.d = \xff\n')
            with self.assertRaises(ConfigError) as cm:
                load_config(path)
        self.assertEqual(cm.exception.issues[0].line, 6)
        self.assertIn('invalid UTF-8 byte 0xff', cm.exception.issues[0].message)
