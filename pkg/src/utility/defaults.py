from configparser import ConfigParser
import os


def populate_settings(config):
    """Fill a ConfigParser with the default sections and keys.

    Args:
        config (ConfigParser): The parser to fill.
    """
    # Set up construction section
    config.add_section("construction")
    config.set("construction", "max_attempts", "100000")
    config.set("construction", "label_iterations", "10000")
    config.set("construction", "max_restarts", "25")
    config.set("construction", "default_e", "8")
    config.set("construction", "default_L", "6")

    # Set up decoder section
    config.add_section("decoder")
    config.set("decoder", "max_iters", "200")
    config.set("decoder", "warmup", "20")
    config.set("decoder", "stagnation_window", "4")
    config.set("decoder", "d_window", "8")
    config.set("decoder", "u", "2")
    config.set("decoder", "floor", "1e-30")
    config.set("decoder", "post_processing", "1")

    # Set up simulation section
    config.add_section("simulation")
    config.set("simulation", "trials", "200")
    config.set("simulation", "workers", "1")
    config.set("simulation", "max_failures", "0")
    config.set("simulation", "criterion", "degenerate")

    # Set up system section
    config.add_section("system")
    config.set("system", "log_level", "INFO")
    config.set("system", "results_dir", "results")


def create_settings_file(file_name):
    """
    Create a settings INI file with specified sections and keys if it doesn't
    exist.

    Args:
        file_name (str): The name of the INI file to create.
    """
    if not os.path.exists(file_name):
        # Initialize ConfigParser
        config = ConfigParser()
        populate_settings(config)

        # Write to file
        with open(file_name, "w") as config_file:
            config.write(config_file)
