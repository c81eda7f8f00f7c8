#!/usr/bin/env python3
"""Test the main routine."""
import contextlib
import io
import json
import os
import pathlib
import sys
import tempfile
import unittest
import unittest.mock
from typing import List, Tuple

import numpy as np
import PIL.Image

import qocr.main

# pylint: disable=missing-docstring
import pyqocr_meta
from qocr import checkpoint, dataset, metrics, model


def run(argv: List[str]) -> Tuple[int, str, str]:
    """Parse the command line and run the main routine capturing both streams."""
    args = qocr.main.parse_args(sys_argv=['qocr'] + argv)
    stream, error_stream = io.StringIO(), io.StringIO()
    retcode = qocr.main._main(args=args, stream=stream, error_stream=error_stream)  # pylint: disable=protected-access
    return retcode, stream.getvalue(), error_stream.getvalue()


def write_inputs(directory: pathlib.Path) -> Tuple[pathlib.Path, pathlib.Path]:
    words_path = directory / 'words.txt'
    words_path.write_text('ab\nbca\n\ncab\nba\nac\n', encoding='utf-8')

    vocab_path = directory / 'vocab.txt'
    vocab_path.write_text('a\nb\nc\n', encoding='utf-8')
    return words_path, vocab_path


class TestParseArgs(unittest.TestCase):
    def test_defaults(self) -> None:
        args = qocr.main.parse_args(sys_argv=['qocr', 'train', '--data', 'ds', '--out', 'run'])

        self.assertEqual('train', args.command)
        self.assertEqual('paper', args.options['config'])
        self.assertEqual(1e-3, args.options['lr'])
        self.assertEqual(32, args.options['batch'])
        self.assertEqual(2000, args.options['iters'])
        self.assertEqual(0, args.options['seed'])
        self.assertIsNone(args.options['resume'])
        self.assertEqual(pathlib.Path('ds'), args.path('data'))

    def test_config_presets(self) -> None:
        args = qocr.main.parse_args(
            sys_argv=['qocr', 'train', '--data', 'ds', '--config', 'paper', '--seed', '1', '--out', 'run1'])
        self.assertEqual('paper', args.options['config'])
        self.assertIn('--config', args.argv)
        self.assertEqual('paper', args.argv[args.argv.index('--config') + 1])

        self.assertEqual(model.PRESETS['paper'](38), model.PRESETS['full'](38))
        self.assertNotEqual(model.PRESETS['paper'](38), model.PRESETS['toy'](38))

        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                qocr.main.parse_args(sys_argv=['qocr', 'train', '--data', 'ds', '--config', 'huge', '--out', 'o'])

    def test_resolved_argv(self) -> None:
        args = qocr.main.parse_args(sys_argv=['qocr', 'split', '--data', 'ds', '--out', 'sp'])
        self.assertListEqual(['split', '--data', 'ds', '--ratios', '0.8', '0.1', '0.1', '--seed', '0', '--out', 'sp'],
                             args.argv)

    def test_gen_words_exclusive(self) -> None:
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                qocr.main.parse_args(
                    sys_argv=['qocr', 'gen', '--words', 'w.txt', '--random-words', '3', '--out', 'ds'])

    def test_version(self) -> None:
        args = qocr.main.parse_args(sys_argv=['qocr', '--version'])
        stream = io.StringIO()
        self.assertEqual(0, qocr.main._main(args=args, stream=stream))  # pylint: disable=protected-access
        self.assertEqual('{}{}'.format(pyqocr_meta.__version__, os.linesep), stream.getvalue())


class TestExitCodes(unittest.TestCase):
    def test_usage_error(self) -> None:
        for argv in [['qocr'], ['qocr', 'train', '--out', 'x'], ['qocr', 'unknown']]:
            with unittest.mock.patch.object(sys, 'argv', argv), contextlib.redirect_stderr(io.StringIO()):
                self.assertEqual(2, qocr.main.main(), argv)

    def test_broken_checkpoint(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = pathlib.Path(tmp)
            ckpt = tmp_path / 'broken.qocr'
            ckpt.write_bytes(b'QOCR\x02\x00garbage')

            image = tmp_path / 'word.png'
            PIL.Image.fromarray(np.full((10, 20), 255, dtype=np.uint8)).save(str(image))

            retcode, out, err = run(['recognize', '--ckpt', str(ckpt), '--image', str(image)])

        self.assertEqual(1, retcode)
        self.assertEqual('', out)
        self.assertTrue(err.startswith(str(ckpt)))
        self.assertIn('(checkpoint-corrupt)', err)

    def test_missing_dataset(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            retcode, _, err = run(['split', '--data', str(pathlib.Path(tmp) / 'missing'), '--out', tmp])

        self.assertEqual(1, retcode)
        self.assertIn('(io)', err)

    def test_word_outside_vocabulary(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = pathlib.Path(tmp)
            _, vocab_path = write_inputs(tmp_path)
            words_path = tmp_path / 'bad.txt'
            words_path.write_text('abz\n', encoding='utf-8')

            retcode, _, err = run(
                ['gen', '--words', str(words_path), '--vocab', str(vocab_path), '--out', str(tmp_path / 'ds')])

        self.assertEqual(1, retcode)
        self.assertIn('(vocabulary)', err)


class TestPipeline(unittest.TestCase):
    def test_gen_and_replay(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = pathlib.Path(tmp)
            words_path, vocab_path = write_inputs(tmp_path)
            out = tmp_path / 'ds'

            retcode, stdout, _ = run(
                ['gen', '--words', str(words_path), '--vocab', str(vocab_path), '--fonts', '2', '--out', str(out)])
            self.assertEqual(0, retcode)
            self.assertIn('Generated 10 sample(s)', stdout)

            manifest = json.loads((out / qocr.main.MANIFEST_FILENAME).read_text(encoding='utf-8'))
            self.assertEqual('gen', manifest['command'])
            self.assertEqual(pyqocr_meta.__version__, manifest['version'])
            self.assertEqual(2, manifest['config']['fonts'])

            blob = (out / dataset.BLOB_FILENAME).read_bytes()
            labels = (out / dataset.LABELS_FILENAME).read_bytes()

            replayed = qocr.main.parse_args(sys_argv=['qocr', '--manifest', str(out / qocr.main.MANIFEST_FILENAME)])
            self.assertListEqual(manifest['argv'], replayed.argv)
            retcode = qocr.main._main(args=replayed, stream=io.StringIO())  # pylint: disable=protected-access
            self.assertEqual(0, retcode)

            self.assertEqual(blob, (out / dataset.BLOB_FILENAME).read_bytes())
            self.assertEqual(labels, (out / dataset.LABELS_FILENAME).read_bytes())

    def test_train_evaluate_and_report(self) -> None:
        # pylint: disable=too-many-locals
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = pathlib.Path(tmp)
            words_path, vocab_path = write_inputs(tmp_path)
            data = tmp_path / 'ds'
            self.assertEqual(0, run(['gen', '--words', str(words_path), '--vocab', str(vocab_path), '--out',
                                     str(data)])[0])

            noisy = tmp_path / 'noisy'
            retcode, _, _ = run(['noise', '--data', str(data), '--sp-density', '0.1', '--out', str(noisy)])
            self.assertEqual(0, retcode)

            split_dir = tmp_path / 'split'
            retcode, stdout, _ = run(['split', '--data', str(data), '--out', str(split_dir)])
            self.assertEqual(0, retcode)
            self.assertIn('Split 10 sample(s) into 8/1/1', stdout)

            run_dir = tmp_path / 'run'
            retcode, _, _ = run([
                'train', '--data', str(data), '--config', 'toy', '--iters', '3', '--batch', '4', '--split-file',
                str(split_dir / 'split.json'), '--out', str(run_dir)
            ])
            self.assertEqual(0, retcode)
            for name in ['last.qocr', 'best.qocr', 'split.json', 'epochs.csv', qocr.main.MANIFEST_FILENAME]:
                self.assertTrue((run_dir / name).exists(), name)

            epoch_lines = (run_dir / 'epochs.csv').read_text(encoding='utf-8').splitlines()
            self.assertEqual(3, len(epoch_lines))  # header, epoch 0 at iteration 2 and the partial epoch at 3

            retcode, _, _ = run([
                'train', '--data', str(data), '--resume', str(run_dir / 'last.qocr'), '--iters', '4',
                '--split-file', str(split_dir / 'split.json'), '--out', str(tmp_path / 'resumed')
            ])
            self.assertEqual(0, retcode)

            eval_dir = tmp_path / 'eval'
            retcode, stdout, _ = run([
                'eval', '--ckpt', str(run_dir / 'best.qocr'), '--data', str(noisy), '--split', 'all', '--name',
                'noisy', '--details', '--out', str(eval_dir)
            ])
            self.assertEqual(0, retcode)
            self.assertTrue(stdout.startswith(','.join(metrics.CSV_HEADER)))

            reports = metrics.read_reports(eval_dir / 'eval.csv')
            self.assertEqual(1, len(reports))
            self.assertEqual('noisy', reports[0].dataset)
            self.assertEqual(10, reports[0].samples)
            self.assertEqual(11, len((eval_dir / 'details.csv').read_text(encoding='utf-8').splitlines()))

            repository, _ = dataset.load_dataset(data)
            image = dataset.export_images(repository, tmp_path / 'images')[0]

            retcode, stdout, _ = run(['recognize', '--ckpt', str(run_dir / 'best.qocr'), '--image', str(image)])
            self.assertEqual(0, retcode)
            self.assertTrue(set(stdout.strip()) <= {'a', 'b', 'c'})

            inspect_dir = tmp_path / 'inspect'
            retcode, stdout, _ = run(
                ['inspect', '--ckpt', str(run_dir / 'best.qocr'), '--image', str(image), '--out', str(inspect_dir)])
            self.assertEqual(0, retcode)
            self.assertIn('logits: [32, 4]', stdout)
            logits = np.load(str(inspect_dir / 'logits.npy'))
            self.assertEqual((32, 4), logits.shape)
            argmax = [int(token) for token in (inspect_dir / 'argmax.txt').read_text(encoding='utf-8').split()]
            self.assertListEqual(list(np.argmax(logits, axis=1)), argmax)
            for k in range(5):
                self.assertTrue((inspect_dir / 'block{}.png'.format(k)).exists())

            report_dir = tmp_path / 'report'
            retcode, stdout, _ = run(['report', '--inputs', str(eval_dir / 'eval.csv'), '--out', str(report_dir)])
            self.assertEqual(0, retcode)
            self.assertTrue(stdout.startswith('experiment,dataset,'))
            self.assertIn('\neval,noisy,10,', stdout)
            self.assertTrue((report_dir / 'chart.svg').exists())

    def test_resume_keeps_best_checkpoint(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = pathlib.Path(tmp)
            words_path, vocab_path = write_inputs(tmp_path)
            data = tmp_path / 'ds'
            self.assertEqual(0, run(['gen', '--words', str(words_path), '--vocab', str(vocab_path), '--out',
                                     str(data)])[0])

            run_dir = tmp_path / 'run'
            self.assertEqual(0, run(['train', '--data', str(data), '--config', 'toy', '--iters', '2', '--batch', '4',
                                     '--out', str(run_dir)])[0])

            # Mark the earlier best as unbeatable; the resumed epochs must not replace it.
            for name in ['last.qocr', 'best.qocr']:
                state = checkpoint.load_checkpoint(run_dir / name)
                state.record_best(1.0)
                checkpoint.save_checkpoint(state, run_dir / name)

            best_before = (run_dir / 'best.qocr').read_bytes()

            retcode, _, _ = run(['train', '--data', str(data), '--resume', str(run_dir / 'last.qocr'), '--iters', '4',
                                 '--out', str(run_dir)])
            self.assertEqual(0, retcode)

            self.assertEqual(best_before, (run_dir / 'best.qocr').read_bytes())

            last = checkpoint.load_checkpoint(run_dir / 'last.qocr')
            self.assertEqual(4, last.iteration)
            self.assertEqual(1.0, last.best_crr)
            self.assertEqual(2, last.best_iteration)

    def test_ingest_exported_images(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = pathlib.Path(tmp)
            words_path, vocab_path = write_inputs(tmp_path)
            data = tmp_path / 'ds'
            self.assertEqual(0, run(['gen', '--words', str(words_path), '--vocab', str(vocab_path), '--out',
                                     str(data)])[0])

            repository, _ = dataset.load_dataset(data)
            dataset.export_images(repository, tmp_path / 'images')

            ingested = tmp_path / 'ingested'
            retcode, stdout, _ = run([
                'ingest', '--list', str(tmp_path / 'images' / 'labels.tsv'), '--vocab', str(vocab_path), '--out',
                str(ingested)
            ])
            self.assertEqual(0, retcode)
            self.assertIn('Ingested 10 sample(s)', stdout)

            restored, _ = dataset.load_dataset(ingested)
            self.assertEqual((data / dataset.BLOB_FILENAME).read_bytes(),
                             (ingested / dataset.BLOB_FILENAME).read_bytes())
            self.assertListEqual([record.word for record in repository.records],
                                 [record.word for record in restored.records])


if __name__ == '__main__':
    unittest.main()
