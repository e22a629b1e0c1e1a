import subprocess
import sys
import os


def run_pytest(extra_args=None):
    print("\n=== Running pytest for Python tests ===")
    tests_dir = os.path.dirname(os.path.abspath(__file__))
    root_dir = os.path.dirname(tests_dir)
    test_files = sorted(f for f in os.listdir(tests_dir) if f.startswith('test_') and f.endswith('.py'))
    if not test_files:
        print("No Python test files found in Tests/.")
        return 0
    print(f"[DEBUG] Running pytest on files: {test_files}")
    paths = [os.path.join('Tests', f) for f in test_files]
    result = subprocess.run([sys.executable, '-m', 'pytest'] + paths + list(extra_args or []),
                            cwd=root_dir, capture_output=True, text=True)
    print(result.stdout)
    if result.stderr:
        print(result.stderr)
    return result.returncode


def main():
    extra = ['-m', 'not slow'] if '--quick' in sys.argv else []
    if run_pytest(extra) != 0:
        print("\nSome tests failed.")
        sys.exit(1)
    print("\nAll tests passed.")


if __name__ == "__main__":
    main()
