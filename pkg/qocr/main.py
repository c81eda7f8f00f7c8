#!/usr/bin/env python3
"""Generate word-image datasets, train and evaluate the recognizer, and report the results."""

# This file is necessary so that we can specify the entry point for pex.

import argparse
import collections
import json
import logging
import os
import pathlib
import sys
from typing import Any, Dict, List, Mapping, Optional, TextIO

import numpy as np
import PIL.Image

import pyqocr_meta
from qocr import checkpoint, dataset, metrics, model, report, training
from qocr.errors import InvalidArgumentError, ParseError, QocrError
from qocr.vocabulary import Vocabulary, default_vocabulary, read_vocabulary

LOGGER = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"

COMMANDS = ('gen', 'ingest', 'split', 'noise', 'train', 'eval', 'recognize', 'inspect', 'report')


def _add_common(parser: argparse.ArgumentParser, seed: bool = True, out_required: bool = True) -> None:
    if seed:
        parser.add_argument("--seed", help="Specify the master seed.", type=int, default=0)
    parser.add_argument(
        "--out", help="Specify the output directory.", required=out_required, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='qocr', description=__doc__)
    parser.add_argument("--version", help="Display the version and return immediately", action='store_true')
    parser.add_argument("--verbose", help="Log the progress in detail.", action='store_true')
    parser.add_argument("--manifest", help="Replay the run recorded in the given manifest file.", default=None)

    subparsers = parser.add_subparsers(dest='command')

    gen = subparsers.add_parser('gen', help="Render synthetic word images into a dataset.")
    words = gen.add_mutually_exclusive_group(required=True)
    words.add_argument("--words", help="Specify a UTF-8 file with one word per line.", default=None)
    words.add_argument("--random-words", help="Sample this many unique random words.", type=int, default=None)
    gen.add_argument("--min-length", help="Specify the minimum length of the random words.", type=int, default=7)
    gen.add_argument("--max-length", help="Specify the maximum length of the random words.", type=int, default=10)
    gen.add_argument("--fonts", help="Specify the number of synthetic fonts.", type=int, default=2)
    gen.add_argument("--style", help="Specify the font style.", choices=[style.value for style in dataset.Style],
                     default=dataset.Style.BOLD.value)
    gen.add_argument("--size", help="Specify the font size in points.", type=int, default=26)
    gen.add_argument("--vocab", help="Specify a vocabulary file (one symbol per line).", default=None)
    _add_common(gen)

    ingest = subparsers.add_parser('ingest', help="Pack externally rendered images into a dataset.")
    ingest.add_argument(
        "--list", help="Specify a TSV file: path, word and optionally font id, style and size.", required=True)
    ingest.add_argument("--vocab", help="Specify a vocabulary file (one symbol per line).", default=None)
    _add_common(ingest, seed=False)

    split = subparsers.add_parser('split', help="Split a dataset into training, validation and test sets.")
    split.add_argument("--data", help="Specify the dataset directory.", required=True)
    split.add_argument(
        "--ratios", help="Specify the training, validation and test ratios.", type=float, nargs=3,
        default=list(dataset.DEFAULT_RATIOS))
    _add_common(split)

    noise = subparsers.add_parser('noise', help="Add salt-and-pepper and speckle noise to a dataset.")
    noise.add_argument("--data", help="Specify the dataset directory.", required=True)
    noise.add_argument("--sp-density", help="Specify the salt-and-pepper density.", type=float, default=0.05)
    noise.add_argument("--speckle-var", help="Specify the speckle variance.", type=float, default=0.04)
    _add_common(noise)

    train = subparsers.add_parser('train', help="Train the recognizer on a dataset.")
    train.add_argument("--data", help="Specify the dataset directory.", required=True)
    train.add_argument(
        "--config",
        help="Specify the architecture ('full' is an alias of 'paper').",
        choices=list(model.PRESETS),
        default='paper')
    train.add_argument("--lr", help="Specify the learning rate.", type=float, default=1e-3)
    train.add_argument("--batch", help="Specify the mini-batch size.", type=int, default=32)
    train.add_argument("--iters", help="Specify the total number of iterations.", type=int, default=2000)
    train.add_argument("--split-file", help="Specify the split; a fresh one is drawn from the seed otherwise.",
                       default=None)
    train.add_argument("--resume", help="Continue from the given checkpoint.", default=None)
    train.add_argument("--log-every", help="Specify the iterations between progress messages.", type=int, default=50)
    train.add_argument(
        "--evaluate-training", help="Report the training CRR and WRR at every epoch.", action='store_true')
    _add_common(train)

    evaluate = subparsers.add_parser('eval', help="Evaluate a checkpoint on a dataset.")
    evaluate.add_argument("--ckpt", help="Specify the checkpoint.", required=True)
    evaluate.add_argument("--data", help="Specify the dataset directory.", required=True)
    evaluate.add_argument(
        "--split", help="Specify the evaluated subset.", choices=['train', 'validate', 'test', 'all'], default='test')
    evaluate.add_argument(
        "--split-file", help="Specify the split; defaults to split.json next to the checkpoint.", default=None)
    evaluate.add_argument("--name", help="Specify the name of the dataset in the report.", default=None)
    evaluate.add_argument("--details", help="Write the per-sample results as well.", action='store_true')
    _add_common(evaluate, out_required=False)

    recognize = subparsers.add_parser('recognize', help="Transcribe a single word image.")
    recognize.add_argument("--ckpt", help="Specify the checkpoint.", required=True)
    recognize.add_argument("--image", help="Specify the image file.", required=True)
    _add_common(recognize, seed=False, out_required=False)

    inspect = subparsers.add_parser('inspect', help="Dump the activations of the network on a word image.")
    inspect.add_argument("--ckpt", help="Specify the checkpoint.", required=True)
    inspect.add_argument("--image", help="Specify the image file.", required=True)
    _add_common(inspect, seed=False)

    summary = subparsers.add_parser('report', help="Summarize evaluation CSVs as a table and a bar chart.")
    summary.add_argument("--inputs", help="Specify the evaluation CSV files.", nargs='+', required=True)
    _add_common(summary, seed=False)

    return parser


class Args:
    """Represent parsed command-line arguments."""

    def __init__(self, args: Any, argv: List[str]) -> None:
        """Initialize with arguments parsed with ``argparse`` and the resolved command line."""
        self.version = bool(args.version)
        self.verbose = bool(args.verbose)
        self.command = None if args.command is None else str(args.command)

        options = vars(args).copy()
        for key in ('version', 'verbose', 'command', 'manifest'):
            options.pop(key, None)

        self.options = collections.OrderedDict(sorted(options.items()))  # type: Dict[str, Any]
        self.argv = argv

    def path(self, key: str) -> Optional[pathlib.Path]:
        """Give the option as a path, if set."""
        value = self.options.get(key, None)
        return None if value is None else pathlib.Path(value)

    def required_path(self, key: str) -> pathlib.Path:
        """Give the option as a path."""
        result = self.path(key)
        assert result is not None, "Expected the option {} to be set".format(key)
        return result


def _resolve_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> List[str]:
    """Reconstruct the command line with all the defaults materialized."""
    # pylint: disable=protected-access
    subparsers_action = next(
        action for action in parser._actions if isinstance(action, argparse._SubParsersAction))
    subparser = subparsers_action.choices[args.command]

    argv = [args.command]
    for action in subparser._actions:
        if not action.option_strings or action.dest == 'help':
            continue

        value = getattr(args, action.dest, None)
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is None:
            continue
        elif isinstance(value, list):
            argv.append(flag)
            argv.extend(str(item) for item in value)
        else:
            argv.extend([flag, str(value)])

    return argv


def parse_args(sys_argv: List[str]) -> Args:
    """
    Parse command-line arguments.

    A ``--manifest`` replaces the command line with the one recorded in the manifest.
    """
    parser = _build_parser()
    args = parser.parse_args(sys_argv[1:])

    if args.manifest is not None:
        manifest_path = pathlib.Path(args.manifest)
        try:
            manifest = json.loads(manifest_path.read_text(encoding='utf-8'))
            recorded = [str(item) for item in manifest['argv']]
        except (OSError, ValueError, KeyError, TypeError) as err:
            parser.error("Failed to read the manifest {}: {}".format(manifest_path, err))

        replayed = parser.parse_args(recorded)
        replayed.verbose = bool(args.verbose) or bool(replayed.verbose)
        args = replayed

    if args.command is None and not args.version:
        parser.error("Expected a command, one of: {}".format(', '.join(COMMANDS)))

    argv = _resolve_argv(parser, args) if args.command is not None else []
    return Args(args=args, argv=argv)


def _write_manifest(args: Args, directory: pathlib.Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    manifest = collections.OrderedDict([
        ('tool', pyqocr_meta.__title__),
        ('version', pyqocr_meta.__version__),
        ('command', args.command),
        ('argv', args.argv),
        ('config', args.options),
    ])
    (directory / MANIFEST_FILENAME).write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + '\n',
                                               encoding='utf-8')


def _vocabulary(args: Args) -> Vocabulary:
    path = args.path('vocab')
    return default_vocabulary() if path is None else read_vocabulary(path)


def _read_words(path: pathlib.Path) -> List[str]:
    words = [line.strip() for line in path.read_text(encoding='utf-8').splitlines()]
    words = [word for word in words if word != '']
    if not words:
        raise ParseError("Expected at least one word", filename=str(path))
    return words


def _gen(args: Args, stream: TextIO) -> None:
    options = args.options
    vocabulary = _vocabulary(args)

    if options['fonts'] < 1:
        raise InvalidArgumentError("Expected at least one font, but got: {}".format(options['fonts']))

    if options['size'] < 1:
        raise InvalidArgumentError("Expected a positive font size, but got: {}".format(options['size']))

    words_path = args.path('words')
    if words_path is not None:
        words = _read_words(words_path)
    else:
        if not 1 <= options['min_length'] <= options['max_length']:
            raise InvalidArgumentError("Expected 1 <= min length <= max length, but got {} and {}".format(
                options['min_length'], options['max_length']))

        if options['random_words'] < 0:
            raise InvalidArgumentError("Expected a non-negative number of words, but got: {}".format(
                options['random_words']))

        words = dataset.sample_words(
            vocabulary=vocabulary,
            count=options['random_words'],
            min_length=options['min_length'],
            max_length=options['max_length'],
            seed=options['seed'])

    LOGGER.info("Rendering %d word(s) in %d font(s)", len(words), options['fonts'])
    repository = dataset.generate_samples(
        words=words,
        fonts=list(range(options['fonts'])),
        config=dataset.RendererConfig(vocabulary=vocabulary, seed=options['seed']),
        style=dataset.Style(options['style']),
        size_pt=options['size'])

    out = args.required_path('out')
    dataset.save_dataset(repository, vocabulary, out)
    stream.write("Generated {} sample(s) into {}{}".format(len(repository), out, os.linesep))


def _ingest(args: Args, stream: TextIO) -> None:
    list_path = args.required_path('list')
    samples = dataset.parse_image_list(
        text=list_path.read_text(encoding='utf-8'), base_directory=list_path.parent, filename=str(list_path))

    vocabulary = _vocabulary(args)
    for sample in samples:
        vocabulary.encode(sample.word)

    repository = dataset.pack(samples)

    out = args.required_path('out')
    dataset.save_dataset(repository, vocabulary, out)
    stream.write("Ingested {} sample(s) into {}{}".format(len(repository), out, os.linesep))


def _split(args: Args, stream: TextIO) -> None:
    repository, _ = dataset.load_dataset(args.required_path('data'))
    ratios = args.options['ratios']
    split = dataset.split_dataset(
        count=len(repository), ratios=(ratios[0], ratios[1], ratios[2]), seed=args.options['seed'])

    out = args.required_path('out')
    out.mkdir(parents=True, exist_ok=True)
    (out / 'split.json').write_text(dataset.serialize_split(split), encoding='utf-8')
    stream.write("Split {} sample(s) into {}/{}/{}{}".format(
        len(repository), len(split.train), len(split.validate), len(split.test), os.linesep))


def _noise(args: Args, stream: TextIO) -> None:
    repository, vocabulary = dataset.load_dataset(args.required_path('data'))
    noisy = dataset.noise_repository(
        repository,
        sp_density=args.options['sp_density'],
        speckle_variance=args.options['speckle_var'],
        seed=args.options['seed'])

    out = args.required_path('out')
    dataset.save_dataset(noisy, vocabulary, out)
    stream.write("Wrote {} noisy sample(s) into {}{}".format(len(noisy), out, os.linesep))


def _load_split(path: pathlib.Path, count: int) -> dataset.Split:
    return dataset.parse_split(path.read_text(encoding='utf-8'), count=count, filename=str(path))


def _train(args: Args, stream: TextIO) -> None:
    options = args.options
    repository, vocabulary = dataset.load_dataset(args.required_path('data'))

    resume = args.path('resume')
    if resume is not None:
        state = checkpoint.load_checkpoint(resume)
        if state.vocabulary != vocabulary:
            raise InvalidArgumentError("The vocabulary of the checkpoint {} differs from the dataset".format(resume))
        LOGGER.info("Resuming from %s at iteration %d", resume, state.iteration)
    else:
        if options['batch'] < 1 or options['lr'] < 0.0:
            raise InvalidArgumentError("Expected a positive batch size and a non-negative learning rate, "
                                       "but got {} and {}".format(options['batch'], options['lr']))

        state = model.build_model(
            config=model.PRESETS[options['config']](len(vocabulary)),
            seed=options['seed'],
            vocabulary=vocabulary,
            hyperparameters=model.Hyperparameters(learning_rate=options['lr'], batch_size=options['batch']))

    split_path = args.path('split_file')
    if split_path is not None:
        split = _load_split(split_path, count=len(repository))
    else:
        split = dataset.split_dataset(count=len(repository), seed=options['seed'])

    if options['iters'] < 0 or options['log_every'] < 1:
        raise InvalidArgumentError("Expected non-negative iterations and a positive logging period, "
                                   "but got {} and {}".format(options['iters'], options['log_every']))

    out = args.required_path('out')
    out.mkdir(parents=True, exist_ok=True)
    (out / 'split.json').write_text(dataset.serialize_split(split), encoding='utf-8')

    best = None  # type: Optional[model.TrainingState]
    if resume is not None and state.best_crr is not None and (out / 'best.qocr').exists():
        best = checkpoint.load_checkpoint(out / 'best.qocr')
        if best.best_crr != state.best_crr:
            LOGGER.warning("The best validation CRR recorded in %s (%s) differs from the one in %s (%s)",
                           out / 'best.qocr', best.best_crr, resume, state.best_crr)

    epochs_file = (out / 'epochs.csv').open('wt', encoding='utf-8')
    try:
        epochs_file.write(','.join(training.EPOCH_CSV_HEADER) + '\n')

        def on_epoch(epoch: training.EpochReport, current: model.TrainingState) -> None:
            epochs_file.write(','.join(training.epoch_row(epoch)) + '\n')
            epochs_file.flush()
            checkpoint.save_checkpoint(current, out / 'last.qocr')

        result = training.train(
            state=state,
            repository=repository,
            split=split,
            schedule=training.Schedule(
                iterations=options['iters'],
                shuffle_seed=options['seed'],
                log_every=options['log_every'],
                evaluate_training=options['evaluate_training']),
            on_epoch=on_epoch,
            best=best)
    finally:
        epochs_file.close()

    checkpoint.save_checkpoint(result.state, out / 'last.qocr')
    checkpoint.save_checkpoint(result.best, out / 'best.qocr')
    stream.write("Trained up to iteration {} over {} epoch report(s); checkpoints in {}{}".format(
        result.state.iteration, len(result.epochs), out, os.linesep))


def _eval(args: Args, stream: TextIO) -> None:
    options = args.options
    ckpt = args.required_path('ckpt')
    state = checkpoint.load_checkpoint(ckpt)
    repository, _ = dataset.load_dataset(args.required_path('data'))

    split_path = args.path('split_file')
    if split_path is None and (ckpt.parent / 'split.json').exists():
        split_path = ckpt.parent / 'split.json'

    if split_path is not None:
        split = _load_split(split_path, count=len(repository))
    else:
        split = dataset.split_dataset(count=len(repository), seed=options['seed'])

    name = options['name'] if options['name'] is not None else options['split']
    evaluation = metrics.evaluate_dataset(
        state, repository, split.subset(options['split']), dataset=name, keep_details=options['details'])

    metrics.write_reports([evaluation], stream)

    out = args.path('out')
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with (out / 'eval.csv').open('wt', encoding='utf-8') as fid:
            metrics.write_reports([evaluation], fid)

        if options['details']:
            with (out / 'details.csv').open('wt', encoding='utf-8') as fid:
                metrics.write_details(evaluation, fid)


def _recognize(args: Args, stream: TextIO) -> None:
    state = checkpoint.load_checkpoint(args.required_path('ckpt'))
    text = model.recognize(state, dataset.load_image_file(args.required_path('image')))
    stream.write("{}{}".format(text, os.linesep))

    out = args.path('out')
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / 'recognized.txt').write_text(text + '\n', encoding='utf-8')


def _to_gray(values: np.ndarray) -> np.ndarray:
    """Stretch the values to the full gray range."""
    low, high = float(np.min(values)), float(np.max(values))
    if high - low < 1e-12:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.round(255.0 * (values - low) / (high - low)).astype(np.uint8)


def _tile_feature_maps(block_output: np.ndarray, count: int = 16, columns: int = 4) -> np.ndarray:
    """Tile the first feature maps (each shown with the height as rows) into a single gray image."""
    width, height, channels = block_output.shape
    count = min(count, channels)
    rows = (count + columns - 1) // columns
    canvas = np.full((rows * (height + 1), columns * (width + 1)), 255, dtype=np.uint8)
    for channel in range(count):
        row, column = divmod(channel, columns)
        top, left = row * (height + 1), column * (width + 1)
        canvas[top:top + height, left:left + width] = _to_gray(block_output[:, :, channel].T)
    return canvas


def _inspect(args: Args, stream: TextIO) -> None:
    state = checkpoint.load_checkpoint(args.required_path('ckpt'))
    activations = model.inspect_activations(state, dataset.load_image_file(args.required_path('image')))

    out = args.required_path('out')
    out.mkdir(parents=True, exist_ok=True)

    for k, block_output in enumerate(activations.block_outputs):
        np.save(str(out / "block{}.npy".format(k)), block_output)
        PIL.Image.fromarray(_tile_feature_maps(block_output)).save(str(out / "block{}.png".format(k)))
        stream.write("block{}: {}{}".format(k, list(block_output.shape), os.linesep))

    np.save(str(out / "sequence.npy"), activations.sequence)
    np.save(str(out / "logits.npy"), activations.logits)
    PIL.Image.fromarray(_to_gray(activations.logits.T)).save(str(out / "logits.png"))

    (out / "argmax.txt").write_text(' '.join(str(int(index)) for index in activations.argmax) + '\n',
                                    encoding='utf-8')

    stream.write("sequence: {}{}".format(list(activations.sequence.shape), os.linesep))
    stream.write("logits: {}{}".format(list(activations.logits.shape), os.linesep))


def _report(args: Args, stream: TextIO) -> None:
    experiments = report.collect_experiments([pathlib.Path(pth) for pth in args.options['inputs']])
    report.write_report(experiments, args.required_path('out'))
    stream.write(report.summary_csv(experiments))


_HANDLERS = collections.OrderedDict([
    ('gen', _gen),
    ('ingest', _ingest),
    ('split', _split),
    ('noise', _noise),
    ('train', _train),
    ('eval', _eval),
    ('recognize', _recognize),
    ('inspect', _inspect),
    ('report', _report),
])  # type: Mapping[str, Any]


def _main(args: Args, stream: TextIO, error_stream: Optional[TextIO] = None) -> int:
    """Execute the main routine."""
    if args.version:
        stream.write("{}{}".format(pyqocr_meta.__version__, os.linesep))
        return 0

    assert args.command is not None

    try:
        _HANDLERS[args.command](args, stream)

        out = args.path('out')
        if out is not None:
            _write_manifest(args, out)
    except QocrError as err:
        (error_stream if error_stream is not None else sys.stderr).write("{}{}".format(err, os.linesep))
        return 1
    except OSError as err:
        (error_stream if error_stream is not None else sys.stderr).write("{} (io){}".format(
            ' '.join(str(err).splitlines()), os.linesep))
        return 1

    return 0


def main() -> int:
    """Wrap the main routine so that it can be tested."""
    try:
        args = parse_args(sys_argv=sys.argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 2

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    return _main(args=args, stream=sys.stdout, error_stream=sys.stderr)
